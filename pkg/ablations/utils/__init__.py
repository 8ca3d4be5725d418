from .helper_functions import *
from .abstract_study import AbstractCaseStudy
