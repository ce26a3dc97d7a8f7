pub mod finetune;
pub mod loss;
pub mod objective;
pub mod optim;
pub mod pretrain;
