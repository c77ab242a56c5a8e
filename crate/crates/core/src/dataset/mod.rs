//! Labels, normalization, noise, windowing and splitting.

mod io;
mod sections;
mod transform;

pub use io::{dataset_csv, read_dataset, write_dataset, DatasetMeta};
pub use sections::{
    label_at, label_loads, labels_for, section_load, section_loads_for, SectionLoad, SectionMap,
    OVERLOAD_THRESHOLD_KG,
};
pub use transform::{
    inject_noise, normalize, prepare, slice, split, NormStats, PrepareParams, PreparedDataset, Sample, SplitSpec,
};
