//! Camera rays, stratified quadrature sampling, exponential compositing,
//! and the per-sample fusion of the mouth and face branches.

pub mod camera;
pub mod composite;
pub mod fuse;
pub mod render;
pub mod sampling;

pub use camera::{Camera, Ray};
pub use composite::{composite, composite_backward};
pub use fuse::{fuse_point, fuse_point_backward, EPS_FUSE};
pub use render::{
    render_field_image, render_field_ray, render_image, render_pixel, render_ray,
    render_ray_backward, FrameCond, RayScratch, RenderSettings,
};
pub use sampling::{deltas_from_ts, sample_ts};
