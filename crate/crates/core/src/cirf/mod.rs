//! Correlation-invariant random filtering: protected templates and queries
//! whose cross-correlation is computable without recovering either image.

mod image;
pub mod oracle;
mod transform;

pub use image::{BioImage, ShiftTable, ShiftWindow};
pub use oracle::{brute_corr, brute_corr_full, brute_min_hamming};
pub use transform::{
    correlation_window, match_correlation, min_hamming_score, random_filter, recover_template_filter, revoke,
    transform_query, transform_template, QuerySpectrum, TemplateParam, TransformedQuery, TransformedTemplate,
};
