//! Recognition of surfaces enveloped by congruent rotational cones, the
//! limit cases (developable, ruled, cylinder, channel and pipe surfaces),
//! and reconstruction of hyperosculating cone positions for flank milling.
//!
//! Everything works in the isotropic model of Laguerre geometry: an oriented
//! surface becomes the graph `z = f(x, y)` of its tangent planes, and a
//! rotational cone of opening angle θ becomes a conic whose top view is a
//! circle of a prescribed spherical radius.

pub mod isomap;
pub mod jets;
pub mod poly;
pub mod contact;
pub mod classify;
pub mod reconstruct;
pub mod pipeline;
