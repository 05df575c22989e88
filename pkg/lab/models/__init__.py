from .runs import ExperimentRun
