from estimator.periodogram import PeriodogramEstimator
from estimator.cnn import CNNEstimator, RefinedCNNEstimator
from estimator.oracle import OracleInitEstimator
