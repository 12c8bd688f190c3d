use std::thread;

use super::plan::TilePlan;
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::tensor::Tensor;

fn crop_tile(x: &Tensor, plan: &TilePlan, origin: [usize; 3]) -> Result<Tensor> {
    let s = x.shape();
    if s.len() == 5 {
        x.crop(&[0, 0, origin[0], origin[1], origin[2]], &[s[0], s[1], plan.tile[0], plan.tile[1], plan.tile[2]])
    } else {
        x.crop(&[0, 0, origin[1], origin[2]], &[s[0], s[1], plan.tile[1], plan.tile[2]])
    }
}

/// Runs `graph` on every tile and blends the outputs with the plan's
/// windows, normalized by the accumulated weight.
///
/// The noise field is drawn once at full size and cropped per tile, so
/// overlapping tiles see the same noise. Tiles are evaluated on up to
/// `threads` workers; accumulation always follows plan order.
pub fn tiled_infer(
    graph: &NetworkGraph,
    input: &Tensor,
    plan: &TilePlan,
    amplitude: f64,
    seed: u64,
    threads: usize,
) -> Result<Tensor> {
    if input.shape() != plan.input_shape.as_slice() {
        return Err(Error::Shape(format!(
            "plan was made for {:?}, input is {:?}",
            plan.input_shape,
            input.shape()
        )));
    }
    let noise = NetworkGraph::noise(input.shape(), seed, amplitude);
    let origins = plan.origins();
    let [nb, ch] = [input.shape()[0], input.shape()[1]];
    let [te, he, we] = plan.extent;
    let [tt, th, tw] = plan.tile;
    let mut acc = vec![0.0; input.len()];
    let run = |o: [usize; 3]| -> Result<Tensor> {
        let xi = crop_tile(input, plan, o)?;
        let ni = crop_tile(&noise, plan, o)?;
        graph.forward_with_noise(&xi, &ni)
    };
    for wave in origins.chunks(threads.max(1)) {
        let outputs: Vec<Result<Tensor>> = if wave.len() == 1 {
            vec![run(wave[0])]
        } else {
            thread::scope(|s| {
                let handles: Vec<_> = wave.iter().map(|&o| s.spawn(move || run(o))).collect();
                handles.into_iter().map(|h| h.join().expect("tile worker panicked")).collect()
            })
        };
        for (&o, out) in wave.iter().zip(outputs) {
            let out = out?;
            let win = plan.window(o);
            let d = out.data();
            for n in 0..nb {
                for c in 0..ch {
                    for t in 0..tt {
                        for y in 0..th {
                            let wty = win.axis(0)[t] * win.axis(1)[y];
                            let src = (((n * ch + c) * tt + t) * th + y) * tw;
                            let dst = (((n * ch + c) * te + o[0] + t) * he + o[1] + y) * we + o[2];
                            for x in 0..tw {
                                acc[dst + x] += wty * win.axis(2)[x] * d[src + x];
                            }
                        }
                    }
                }
            }
        }
    }
    let [at, ay, ax] = plan.accumulated_weight();
    for (r, row) in acc.chunks_mut(we).enumerate() {
        let (t, y) = ((r / he) % te, r % he);
        for (x, v) in row.iter_mut().enumerate() {
            let w = at[t] * ay[y] * ax[x];
            if w <= 0.0 {
                return Err(Error::Contract(format!("no tile weight at ({t}, {y}, {x})")));
            }
            *v /= w;
        }
    }
    Tensor::new(input.shape().to_vec(), acc)
}
