//! Multimodal vision fusion kernels: stereo depth, division-of-focal-plane
//! polarimetry, panoramic annular unwrapping and depth-guided registration
//! of polarization onto color for water-hazard detection, plus a synthetic
//! scene renderer that supplies ground truth for all of them.

// NaN-rejecting checks are written `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fusion;
pub mod geometry;
pub mod panoramic;
pub mod plane;
pub mod polarization;
pub mod stereo;
pub mod synth;

pub use error::{Error, Result};
pub use fusion::{
    detect_water, dolp_lookup, overlay_visualization, reproject_pixel, ClassTable, LabelMap,
    RegistrationRig, WaterParams,
};
pub use geometry::{
    backproject, project, rotation_sqrt, transform_point, CameraIntrinsics, Pixel, Point3,
    RigidTransform, TransformSpec,
};
pub use panoramic::{build_unwrap, pal_radius, pal_ray, unwrap_image, PalModel, UnwrapMapping};
pub use plane::{Image, Interpolation, Plane};
pub use polarization::{
    demosaic, dolp, fresnel, reflection_dolp, stokes_from_planes, DemosaicMode,
    FresnelCoefficients, MosaicFrame, MosaicLayout, PolarizationFrame,
};
pub use stereo::{
    build_rectification, disparity_to_depth, match_disparity, rectify_image, DepthMap,
    DisparityMap, MatchParams, Rectification,
};
pub use synth::{SceneSpec, GroundTruth};
