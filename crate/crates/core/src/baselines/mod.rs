//! Baseline calibrators: projected gradient descent on the average log
//! loss in exponential-family form, and the discriminative frequency
//! estimate for naive Bayes.

mod dfe;
mod gd;
mod simplex;

pub use dfe::dfe_fit;
pub use gd::{
    gd_fit_nb, gd_fit_qda, nb_log_loss_gradient, qda_log_loss_gradient, GdConfig,
    NbNaturalParams, QdaNaturalParams,
};
pub use simplex::project_simplex;
