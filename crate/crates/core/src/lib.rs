//! Exact counting, Fourier analysis, construction and minimization of
//! 3-term arithmetic progressions in `Z/qZ` for prime `q`.

pub mod ap_count;
pub mod behrend;
pub mod error;
pub mod fourier;
pub mod ntt;
pub mod prime;
pub mod rectify;
pub mod search;
pub mod transfer;
pub mod zq;

pub use ap_count::{count_3aps_convolution, count_3aps_naive, ApCountReport};
pub use behrend::{
    behrend_set, embed_mod_q, max_apfree_size, verify_ap_free, BehrendSet, EmbeddedSet,
};
pub use error::{Error, Result};
pub use fourier::{dft, large_spectrum, LargeSpectrum, Spectrum};
pub use rectify::{
    find_rectifying_dilation, rectify, RectificationCertificate, SpectralCertificate,
};
pub use search::{exact_min, local_search, LocalConfig, SearchMethod, SearchResult};
pub use transfer::{
    main_theorem_experiment, ExperimentConfig, ExperimentReport, InvarianceProfile, TransferReport,
};
pub use zq::{affine_apply, mod_inverse, random_set, shift_intersection, AffineMap, ResidueSet};
