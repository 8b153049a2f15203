//! Reverse-mode derivative of `G_m(h, h)` with respect to the base immersion
//! `m` and the tangent field `h`, replaying the discrete pipeline
//! `m → ∂m → g → (g⁻¹, ρ, ∂g → Γ) → ∂²m → S → H → |H|^w` and the
//! covariant-derivative tower of `h` backwards.

use crate::error::Result;
use crate::geometry::{
    as4, connection_correction_node_adjoint, covariant_derivative_tower, first_kind, Contractor,
    InducedGeometry,
};
use crate::grid::{chart_gradient_adjoint, dot, GridImmersion, TensorField};
use crate::metric::{MetricConfig, OrderRole};

pub(crate) struct MetricAdjoint {
    pub value: f64,
    pub m_bar: TensorField,
    pub h_bar: TensorField,
}

const IDENTITY: [f64; 4] = [1.0, 0.0, 0.0, 1.0];

pub(crate) fn metric_adjoint(
    m: &GridImmersion,
    h: &TensorField,
    cfg: &MetricConfig,
) -> Result<MetricAdjoint> {
    let geom = InducedGeometry::new(m, cfg.immersion_floor)?;
    let tower = covariant_derivative_tower(&geom, h, cfg.k)?;
    let grid = geom.grid();
    let n = grid.len();
    let d = geom.dim();
    let area = grid.cell_area();
    let w = cfg.weight_exponent;
    let hnorm = geom.mean_curvature_norm();

    let mut value = 0.0;
    let mut rho_bar = vec![0.0; n];
    let mut wgt_bar = vec![0.0; n];
    let mut ginv_bar = vec![0.0; 4 * n];
    let mut tower_bar: Vec<TensorField> = tower
        .iter()
        .map(|x| TensorField::zeros(grid, x.ty(), d))
        .collect();

    let mut ctr = Contractor::default();
    let mut partial = Contractor::default();
    for node in 0..n {
        let gi = geom.node_g_inv(node);
        let rho = geom.rho.values()[node];
        let wgt = hnorm.values()[node].powf(w);
        let mut density = 0.0;
        for (order, x_field) in tower.iter().enumerate() {
            let Some(role) = cfg.order_role(order) else {
                continue;
            };
            let coef = match role {
                OrderRole::Plain => 1.0,
                OrderRole::Weighted => wgt,
            };
            let x = x_field.node(node);
            let mats = vec![&gi; order];
            let z = ctr.apply(order, d, x, &mats);
            let fiber = dot(x, z);
            density += coef * fiber;
            if role == OrderRole::Weighted {
                wgt_bar[node] += rho * area * fiber;
            }
            let scale = coef * rho * area;
            let xb = tower_bar[order].node_mut(node);
            for (b, zi) in xb.iter_mut().zip(z) {
                *b += 2.0 * scale * zi;
            }
            // ∂fiber/∂g⁻¹ one slot at a time
            for s in 0..order {
                let mut mats_s = mats.clone();
                mats_s[s] = &IDENTITY;
                let zs = partial.apply(order, d, x, &mats_s);
                let stride = 1usize << (order - 1 - s);
                for prefix in 0..(1usize << order) {
                    let p = (prefix / stride) & 1;
                    let base = prefix - p * stride;
                    for q in 0..2 {
                        let other = (base + q * stride) * d;
                        let xs = &x[prefix * d..(prefix + 1) * d];
                        ginv_bar[4 * node + 2 * p + q] += scale * dot(xs, &zs[other..other + d]);
                    }
                }
            }
        }
        value += density * rho * area;
        rho_bar[node] = density * area;
    }

    // tower backwards: X_{j+1} = ∂X_j + Γ·X_j
    let mut gamma_bar = vec![0.0; 8 * n];
    for j in (1..tower.len()).rev() {
        let out_bar = std::mem::replace(&mut tower_bar[j], TensorField::zeros(grid, tower[j].ty(), d));
        let mut xb = chart_gradient_adjoint(&out_bar);
        let ty = tower[j - 1].ty();
        if ty.chart_slots() > 0 {
            let amb = ty.ambient_len(d);
            for node in 0..n {
                let gam = geom.node_gamma(node);
                let mut gb = [0.0; 8];
                connection_correction_node_adjoint(
                    ty,
                    amb,
                    &gam,
                    tower[j - 1].node(node),
                    out_bar.node(node),
                    xb.node_mut(node),
                    &mut gb,
                );
                for (acc, v) in gamma_bar[8 * node..8 * node + 8].iter_mut().zip(gb) {
                    *acc += v;
                }
            }
        }
        tower_bar[j - 1] = tower_bar[j - 1].add(&xb)?;
    }
    let h_bar = tower_bar.swap_remove(0);

    // |H|^w, H = g^{ab} S_ab, S = ∂²m − Γ·∂m
    let tf = &geom.tangent_map;
    let s_field = &geom.second_fundamental;
    let mut s_bar = TensorField::zeros(grid, s_field.ty(), d);
    let mut tf_bar = TensorField::zeros(grid, tf.ty(), d);
    for node in 0..n {
        let hn = hnorm.values()[node];
        let hv = geom.mean_curvature.node(node);
        let coef = if hn > 0.0 && w != 0.0 {
            wgt_bar[node] * w * hn.powf(w - 2.0)
        } else {
            0.0
        };
        let gi = geom.node_g_inv(node);
        let sn = s_field.node(node);
        let sb = s_bar.node_mut(node);
        for ab in 0..4 {
            let mut acc = 0.0;
            for x in 0..d {
                let hb = coef * hv[x];
                sb[ab * d + x] = gi[ab] * hb;
                acc += hb * sn[ab * d + x];
            }
            ginv_bar[4 * node + ab] += acc;
        }
        let gam = geom.node_gamma(node);
        let t = tf.node(node);
        let tb = tf_bar.node_mut(node);
        for a in 0..2 {
            for b in 0..2 {
                let sab = &sb[(2 * a + b) * d..(2 * a + b + 1) * d];
                for c in 0..2 {
                    let idx = 4 * c + 2 * a + b;
                    gamma_bar[8 * node + idx] -= dot(sab, &t[c * d..(c + 1) * d]);
                    for x in 0..d {
                        tb[c * d + x] -= gam[idx] * sab[x];
                    }
                }
            }
        }
    }
    let tf_bar = tf_bar.add(&chart_gradient_adjoint(&s_bar))?;

    // Γ^a_bc = g^{ad} L_d(b, c) with L linear in ∂g
    let mut dg_bar = TensorField::zeros(grid, geom.dg.ty(), d);
    for node in 0..n {
        let gi = geom.node_g_inv(node);
        let dgn = geom.dg.node(node);
        let gb = &gamma_bar[8 * node..8 * node + 8];
        let db = dg_bar.node_mut(node);
        for b in 0..2 {
            for c in 0..2 {
                for dd in 0..2 {
                    let l = first_kind(dgn, dd, b, c);
                    let mut lb = 0.0;
                    for a in 0..2 {
                        let gba = gb[4 * a + 2 * b + c];
                        ginv_bar[4 * node + 2 * a + dd] += gba * l;
                        lb += gba * gi[2 * a + dd];
                    }
                    let half = 0.5 * lb;
                    db[4 * dd + 2 * c + b] += half;
                    db[4 * b + 2 * dd + c] += half;
                    db[4 * b + 2 * c + dd] -= half;
                }
            }
        }
    }
    let mut g_bar = chart_gradient_adjoint(&dg_bar);

    // g⁻¹ and ρ = √det g
    for node in 0..n {
        let gi = geom.node_g_inv(node);
        let git = [gi[0], gi[2], gi[1], gi[3]];
        let ib = as4(&ginv_bar[4 * node..4 * node + 4]);
        let rho = geom.rho.values()[node];
        let gb = g_bar.node_mut(node);
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        acc += git[2 * i + k] * ib[2 * k + l] * git[2 * l + j];
                    }
                }
                gb[2 * i + j] += -acc + rho_bar[node] * 0.5 * rho * git[2 * i + j];
            }
        }
    }

    // g_ab = ⟨∂_a m, ∂_b m⟩
    let mut tf_bar = tf_bar;
    for node in 0..n {
        let gb = as4(g_bar.node(node));
        let t = tf.node(node);
        let tb = tf_bar.node_mut(node);
        for a in 0..2 {
            for b in 0..2 {
                let c = gb[2 * a + b];
                for x in 0..d {
                    tb[a * d + x] += c * t[b * d + x];
                    tb[b * d + x] += c * t[a * d + x];
                }
            }
        }
    }
    let m_bar = chart_gradient_adjoint(&tf_bar);
    Ok(MetricAdjoint {
        value,
        m_bar,
        h_bar,
    })
}
