use std::fmt::Write as _;

use super::args::{required, Context, InspectArgs};
use super::error::CliError;
use super::manifest::Outputs;
use crate::pem::{load_model, Condition, ConditionParams, OcclusionLevel, PemModel};

pub const PARAMS: [&str; 10] = [
    "pi1",
    "a01",
    "a11",
    "a00",
    "a10",
    "mu_r",
    "mu_theta",
    "sigma_r",
    "sigma_theta",
    "rho",
];

/// Reads one named parameter of a condition. `pi1` is the stationary
/// detection probability.
pub fn param_value(p: &ConditionParams, name: &str) -> Option<f64> {
    let t = &p.transition;
    let e = &p.error;
    Some(match name {
        "pi1" => t.stationary_detection(),
        "a01" => t.a01,
        "a11" => t.a11,
        "a00" => t.a00(),
        "a10" => t.a10(),
        "mu_r" => e.mu_r,
        "mu_theta" => e.mu_theta,
        "sigma_r" => e.sigma_r,
        "sigma_theta" => e.sigma_theta,
        "rho" => e.rho,
        _ => return None,
    })
}

/// `ring,sector,value` rows for one occlusion level, ring-major.
pub fn grid_csv(model: &PemModel, occlusion: OcclusionLevel, name: &str) -> String {
    let g = model.grid;
    let mut s = format!("ring,sector,{name}\n");
    for ring in 0..g.n_rings() {
        for sector in 0..g.n_sectors() {
            let v = param_value(model.params(Condition { occlusion, ring, sector }), name).expect("known parameter");
            let _ = writeln!(s, "{ring},{sector},{v}");
        }
    }
    s
}

/// Value against ring for the sector containing `theta = 0`, every occlusion
/// level.
pub fn frontal_cone_csv(model: &PemModel, name: &str) -> String {
    let g = model.grid;
    let sector = g.sector_of(0.0);
    let mut s = if name == "pi1" {
        "occlusion,ring,r_inner_m,r_outer_m,pi1\n".to_string()
    } else {
        format!("occlusion,ring,r_inner_m,r_outer_m,{name},pi1\n")
    };
    for occlusion in OcclusionLevel::ALL {
        for ring in 0..g.n_rings() {
            let p = model.params(Condition { occlusion, ring, sector });
            let r0 = ring as f64 * g.ring_depth_m;
            let r1 = r0 + g.ring_depth_m;
            let pi1 = p.transition.stationary_detection();
            let _ = if name == "pi1" {
                writeln!(s, "{},{ring},{r0},{r1},{pi1}", occlusion.index())
            } else {
                writeln!(s, "{},{ring},{r0},{r1},{},{pi1}", occlusion.index(), param_value(p, name).expect("known parameter"))
            };
        }
    }
    s
}

pub fn inspect(ctx: &Context, a: &InspectArgs) -> Result<(), CliError> {
    let model_path = required(a.model.clone(), "model")?;
    let param = a.param.clone().unwrap_or_else(|| "pi1".into());
    if !PARAMS.contains(&param.as_str()) {
        return Err(CliError::Usage(format!(
            "unknown parameter {param:?}; valid names: {}",
            PARAMS.join(", ")
        )));
    }
    let mut out = Outputs::create(ctx)?;
    let result = (|| {
        out.input(&model_path)?;
        let model = load_model(&model_path)?;
        let mut names = vec![param.as_str()];
        if param != "pi1" {
            names.push("pi1");
        }
        for name in names {
            for occ in OcclusionLevel::ALL {
                out.write(&format!("{name}_vis{}.csv", occ.index()), grid_csv(&model, occ, name).as_bytes())?;
            }
        }
        out.write("frontal_cone.csv", frontal_cone_csv(&model, &param).as_bytes())?;
        println!("wrote {param} grids for {} to {}", model_path.display(), out.dir().display());
        Ok(())
    })();
    out.finish(ctx, result.as_ref().err())?;
    result
}
