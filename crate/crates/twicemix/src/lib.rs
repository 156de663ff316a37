//! Image files, model files, dataset manifests and the command line for
//! twice-mixing quality ranking. The algorithms live in `twicemix_core`.

pub mod cli;
pub mod dataset;
pub mod io;
pub mod model_file;
pub mod toy;
