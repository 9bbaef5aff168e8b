from .logreg import LogRegModel, lr_gradient, lr_predict, lr_train
from .mlp import MlpModel, mlp_loss_and_grads, mlp_predict, mlp_train
from .hmm import HmmModel, HmmPair, hmm_classify, hmm_loglik, hmm_train
from .lstm import LstmModel, TrainConfig, lstm_forward, lstm_predict_batch, lstm_train

__all__ = [
    "LogRegModel", "lr_train", "lr_predict", "lr_gradient",
    "MlpModel", "mlp_train", "mlp_predict", "mlp_loss_and_grads",
    "HmmModel", "HmmPair", "hmm_train", "hmm_classify", "hmm_loglik",
    "LstmModel", "TrainConfig", "lstm_forward", "lstm_train", "lstm_predict_batch",
]
