__title__ = "chronoclock"
__description__ = "Arrival and dwell times of a 1D quantum particle read off an idealised clock"
__url__ = "https://github.com/chronoclock/chronoclock"
__download_url__ = "https://github.com/chronoclock/chronoclock"
__version__ = "0.3.0"
__author__ = "chronoclock developers"
__author_email__ = "chronoclock.dev@gmail.com"
