// temporary validation harness; removed before release
use ragnet_core::dataset::{load_cifar10, load_mnist};
use ragnet_core::graph::build_rag;
use ragnet_core::segmentation::{quickshift, segmentation_stats, QuickshiftParams};
use rayon::prelude::*;
use std::path::Path;
use std::time::Instant;

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let data = Path::new("data");

    let t0 = Instant::now();
    let mnist = load_mnist::<f64>(
        &data.join("mnist/train-images-idx3-ubyte"),
        &data.join("mnist/train-labels-idx1-ubyte"),
    )
    .unwrap();
    let imgs = &mnist.images[..n];
    let params = QuickshiftParams::new(2.0, 1.0, 2);
    let results: Vec<_> = imgs
        .par_iter()
        .map(|img| {
            let map = quickshift(img, &params).unwrap();
            let rag = build_rag(img, &map).unwrap();
            (map, rag)
        })
        .collect();
    let maps: Vec<_> = results.iter().map(|(m, _)| m.clone()).collect();
    let rags: Vec<_> = results.iter().map(|(_, g)| g.clone()).collect();
    let stats = segmentation_stats(&maps, Some(&rags)).unwrap();
    println!(
        "MNIST({n}) t={:.1}s N mean={:.2} [61.6-102.6] min={} max={} deg mean={:.3} [4.42-9.18] min={:?} max={:?}",
        t0.elapsed().as_secs_f64(),
        stats.mean_nodes,
        stats.min_nodes,
        stats.max_nodes,
        stats.mean_degree.unwrap(),
        stats.min_degree.unwrap(),
        stats.max_degree.unwrap()
    );

    let t0 = Instant::now();
    let cifar = load_cifar10::<f64>(&[data.join("cifar10/data_batch_1.bin")]).unwrap();
    let imgs = &cifar.images[..n];
    let params = QuickshiftParams::new(1.0, 1.0, 5);
    let results: Vec<_> = imgs
        .par_iter()
        .map(|img| {
            let map = quickshift(img, &params).unwrap();
            let rag = build_rag(img, &map).unwrap();
            (map, rag)
        })
        .collect();
    let maps: Vec<_> = results.iter().map(|(m, _)| m.clone()).collect();
    let rags: Vec<_> = results.iter().map(|(_, g)| g.clone()).collect();
    let stats = segmentation_stats(&maps, Some(&rags)).unwrap();
    println!(
        "CIFAR({n}) t={:.1}s N mean={:.2} [136.5-227.5] min={} max={} deg mean={:.3} [4.81-9.99] min={:?} max={:?}",
        t0.elapsed().as_secs_f64(),
        stats.mean_nodes,
        stats.min_nodes,
        stats.max_nodes,
        stats.mean_degree.unwrap(),
        stats.min_degree.unwrap(),
        stats.max_degree.unwrap()
    );
}
