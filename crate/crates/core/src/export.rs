//! CSV and SVG artifacts. Every file opens with a comment line naming the
//! tool version, followed by the column header.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::Vector2;

use crate::geometry::{cc_transform_unchecked, AgentConfig, GeometryParams, Pose2, Segment, StiffnessState};
use crate::planner::PlanResult;
use crate::simulator::Trajectory;
use crate::wheelmodel::VelocityInput;

pub const VERSION_LINE: &str = concat!("# softrigid ", env!("CARGO_PKG_VERSION"));

/// CSV writer that has already emitted the version line.
pub fn csv_writer<W: Write>(mut out: W) -> std::io::Result<csv::Writer<W>> {
    writeln!(out, "{VERSION_LINE}")?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out))
}

const PLAN_COLUMNS: [&str; 13] = [
    "t", "x", "y", "phi", "kappa1", "kappa2", "s1", "s2", "v1", "v2", "u0", "v0", "r0",
];

fn plan_fields(t: f64, q: &AgentConfig, s: StiffnessState, v: &VelocityInput) -> Vec<String> {
    let mut f: Vec<String> = [t, q.x, q.y, q.phi, q.kappa1, q.kappa2].iter().map(f64::to_string).collect();
    f.push((s.s1 as u8).to_string());
    f.push((s.s2 as u8).to_string());
    f.extend([v.v1, v.v2, v.u0, v.v0, v.r0].iter().map(f64::to_string));
    f
}

/// One row per plan step (configuration before the step and the command
/// applied), then a closing row with the final configuration at rest.
pub fn write_plan_csv<W: Write>(out: W, plan: &PlanResult) -> std::io::Result<()> {
    let mut w = csv_writer(out)?;
    w.write_record(PLAN_COLUMNS)?;
    let dt = plan.params.dt;
    for (k, (s, v)) in plan.stiffness_schedule.iter().zip(&plan.velocity_schedule).enumerate() {
        w.write_record(plan_fields(k as f64 * dt, &plan.trajectory[k], *s, v))?;
    }
    let n = plan.steps();
    let last_s = plan.stiffness_schedule.last().copied().unwrap_or_default();
    w.write_record(plan_fields(n as f64 * dt, &plan.final_config(), last_s, &VelocityInput::ZERO))?;
    w.flush()
}

/// Plan columns plus pause flag, wheel speeds and both thermal states.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> std::io::Result<()> {
    let mut w = csv_writer(out)?;
    let mut header: Vec<&str> = PLAN_COLUMNS.to_vec();
    header.extend([
        "paused", "saturated", "w1", "w2", "w3", "w4", "T1", "T2", "u1", "u2", "phase1", "phase2",
    ]);
    w.write_record(&header)?;
    for s in &traj.samples {
        let mut f = plan_fields(s.state.t, &s.state.q, s.state.s, &s.v);
        f.push((s.paused as u8).to_string());
        f.push((s.saturated as u8).to_string());
        f.extend(s.omega.omega.iter().map(f64::to_string));
        let th = &s.state.thermal;
        f.extend([th[0].temperature, th[1].temperature, th[0].u, th[1].u].iter().map(f64::to_string));
        f.push(th[0].phase.to_string());
        f.push(th[1].phase.to_string());
        w.write_record(&f)?;
    }
    w.flush()
}

/// Long-format thermal trace: one row per sample and segment.
pub fn write_thermal_csv<W: Write>(
    out: W,
    traj: &Trajectory,
    params: &crate::thermal::ThermalParams,
) -> std::io::Result<()> {
    let mut w = csv_writer(out)?;
    w.write_record(["t", "segment", "T", "u", "phase", "setpoint"])?;
    for s in &traj.samples {
        for seg in Segment::BOTH {
            let th = &s.state.thermal[seg.index()];
            w.write_record(&[
                s.state.t.to_string(),
                (seg.index() + 1).to_string(),
                th.temperature.to_string(),
                th.u.to_string(),
                th.phase.to_string(),
                params.setpoint(s.state.s.is_soft(seg)).to_string(),
            ])?;
        }
    }
    w.flush()
}

pub const SOFT_COLOUR: &str = "#1f5fbf";
pub const RIGID_COLOUR: &str = "#c0392b";
const ARC_POINTS: usize = 24;

fn fmt_point(p: &Vector2<f64>) -> String {
    format!("{:.5},{:.5}", p.x, p.y)
}

/// Points along segment `seg` from the middle link outwards, in `{b0}`.
fn arc_points(kappa: f64, seg: Segment, geom: &GeometryParams) -> Vec<Vector2<f64>> {
    (0..=ARC_POINTS)
        .map(|i| {
            let partial = GeometryParams {
                l: geom.l * i as f64 / ARC_POINTS as f64,
                ..*geom
            };
            if i == 0 {
                Vector2::new(seg.side() * geom.l0 / 2.0, 0.0)
            } else {
                cc_transform_unchecked(kappa, seg, &partial).origin()
            }
        })
        .collect()
}

/// SVG snapshot of the agent: middle link, both segments coloured by
/// stiffness, end links, unit blocks and wheel markers.
pub fn render_svg(q: &AgentConfig, s: StiffnessState, geom: &GeometryParams, title: &str) -> String {
    let body = q.body_pose();
    let to_world = |p: &Vector2<f64>| body.transform_point(p);
    let mut shapes = String::new();
    let mut all_points: Vec<Vector2<f64>> = Vec::new();

    let mut polyline = |pts: Vec<Vector2<f64>>, colour: &str, width: f64, shapes: &mut String| {
        let world: Vec<Vector2<f64>> = pts.iter().map(to_world).collect();
        let joined: Vec<String> = world.iter().map(fmt_point).collect();
        let _ = writeln!(
            shapes,
            r#"  <polyline points="{}" fill="none" stroke="{colour}" stroke-width="{width:.5}" stroke-linecap="round"/>"#,
            joined.join(" ")
        );
        all_points.extend(world);
    };

    let link_w = geom.l / 8.0;
    polyline(
        vec![Vector2::new(-geom.l0 / 2.0, 0.0), Vector2::new(geom.l0 / 2.0, 0.0)],
        "#555555",
        link_w,
        &mut shapes,
    );
    for seg in Segment::BOTH {
        let kappa = q.kappa(seg);
        let colour = if s.is_soft(seg) { SOFT_COLOUR } else { RIGID_COLOUR };
        polyline(arc_points(kappa, seg, geom), colour, link_w * 1.5, &mut shapes);
        let end: Pose2 = cc_transform_unchecked(kappa, seg, geom);
        let out = |x: f64, y: f64| end.transform_point(&Vector2::new(seg.side() * x, y));
        polyline(vec![out(0.0, 0.0), out(geom.l1, 0.0)], "#555555", link_w, &mut shapes);
        let (x0, x1, h) = (geom.l1, geom.l1 + geom.a, geom.a / 2.0);
        let block = vec![out(x0, -h), out(x1, -h), out(x1, h), out(x0, h), out(x0, -h)];
        polyline(block, "#222222", link_w / 2.0, &mut shapes);
    }
    let wheels = crate::geometry::wheel_positions_body(&AgentConfig { x: 0.0, y: 0.0, phi: 0.0, ..*q }, geom);
    if let Ok(wheels) = wheels {
        for w in wheels {
            let c = to_world(&Vector2::new(w.x, w.y));
            let _ = writeln!(
                shapes,
                r##"  <circle cx="{:.5}" cy="{:.5}" r="{:.5}" fill="#f1c40f" stroke="#222222" stroke-width="{:.5}"/>"##,
                c.x,
                c.y,
                geom.rho_w / 2.0,
                link_w / 4.0
            );
        }
    }

    let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
    for p in &all_points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let margin = geom.l;
    lo -= Vector2::repeat(margin);
    hi += Vector2::repeat(margin);
    let size = hi - lo;
    let mut svg = String::new();
    let _ = writeln!(svg, "<!-- {} -->", &VERSION_LINE[2..]);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.5} {:.5} {:.5} {:.5}" width="600" height="{:.0}">"#,
        lo.x,
        -hi.y,
        size.x,
        size.y,
        600.0 * size.y / size.x
    );
    let _ = writeln!(svg, "  <title>{title}</title>");
    let _ = writeln!(svg, r#"  <g transform="scale(1,-1)">"#);
    svg.push_str(&shapes);
    svg.push_str("  </g>\n</svg>\n");
    svg
}
