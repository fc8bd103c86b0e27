//! Shared fixtures for the kernel benchmarks: one rendered street frame
//! plus everything the stages precompute per rig.

use polyfuse_core::fusion::{ClassTable, DEFAULT_WATER_DELTA};
use polyfuse_core::polarization::DEFAULT_DOLP_EPSILON;
use polyfuse_core::stereo::{DepthMap, DEFAULT_Z_MAX, DEFAULT_Z_MIN};
use polyfuse_core::synth::render_scene;
use polyfuse_core::{
    build_rectification, build_unwrap, disparity_to_depth, match_disparity, rectify_image, DemosaicMode, Image,
    Interpolation, LabelMap, MatchParams, MosaicFrame, Plane, PolarizationFrame, Rectification, RegistrationRig,
    SceneSpec, UnwrapMapping, WaterParams,
};

/// Resolutions the throughput numbers are reported at.
pub const RESOLUTIONS: [(usize, usize); 2] = [(320, 240), (640, 480)];

pub struct Fixture {
    pub width: usize,
    pub height: usize,
    pub left: Image,
    pub right: Image,
    pub rect: Rectification,
    pub rect_left: Image,
    pub rect_right: Image,
    pub match_params: MatchParams,
    pub mosaic: MosaicFrame,
    pub annulus: Image,
    pub unwrap: UnwrapMapping,
    pub labels: LabelMap,
    pub depth: DepthMap,
    pub dolp: Plane<f64>,
    pub rig: RegistrationRig,
    pub water: WaterParams,
}

impl Fixture {
    /// Street scene at `width`×`height` with stereo search scaled to the
    /// resolution (64 disparities at 640 px).
    pub fn street(width: usize, height: usize) -> Self {
        let spec = SceneSpec::street(width, height, 7);
        let scene = render_scene(&spec).expect("street scene renders");
        let rig = &spec.rig;
        let t = rig.left_to_right.to_transform().expect("valid rig");
        let rect = build_rectification(&rig.k_left, &rig.k_right, &t).expect("rectifiable rig");
        let rect_left = rectify_image(&scene.stereo.left, &rect.left_rotation, &rig.k_left, &rect.k_rect, 0.0)
            .expect("sizes match");
        let rect_right = rectify_image(&scene.stereo.right, &rect.right_rotation, &rig.k_right, &rect.k_rect, 0.0)
            .expect("sizes match");
        let match_params = MatchParams {
            max_disparity: (64 * width).div_ceil(640),
            ..MatchParams::default()
        };
        let disp = match_disparity(&rect_left, &rect_right, &match_params).expect("matching runs");
        let depth = disparity_to_depth(&disp, rect.k_rect.fx, rect.baseline, (DEFAULT_Z_MIN, DEFAULT_Z_MAX))
            .expect("valid rig");
        let mosaic = scene.mosaic.expect("street scene has a polarization camera");
        let polar = rig.polar.as_ref().expect("street scene has a polarization camera");
        let frame = PolarizationFrame::from_mosaic(&mosaic.mosaic, DemosaicMode::Superpixel, DEFAULT_DOLP_EPSILON)
            .expect("even mosaic");
        let pal = rig.pal.as_ref().expect("street scene has a panoramic lens");
        let unwrap = build_unwrap(&pal.model, pal.model.default_unwrap_width()).expect("valid PAL model");
        Self {
            width,
            height,
            left: scene.stereo.left,
            right: scene.stereo.right,
            rect_left,
            rect_right,
            match_params,
            mosaic: mosaic.mosaic,
            annulus: scene.annulus.expect("street scene has a panoramic lens"),
            unwrap,
            labels: scene.stereo.labels,
            depth,
            dolp: frame.dolp,
            rig: RegistrationRig {
                k_color: rect.k_rect,
                k_polar: polar.k_sensor.binned_2x2(),
                color_to_polar: polar.left_to_polar.to_transform().expect("valid rig"),
            },
            water: WaterParams::from_table(&ClassTable::default(), DEFAULT_WATER_DELTA, Interpolation::Nearest)
                .expect("default table has road and water"),
            rect,
        }
    }

    pub fn label(&self) -> String {
        format!("{}x{}", self.width, self.height)
    }
}
