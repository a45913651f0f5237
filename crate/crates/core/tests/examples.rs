use microagg_core::dataset::{synthesize, SynthSpec};
use microagg_core::fpclust::{fp_cluster, pcaes, select_partition, FuzzinessParams};
use microagg_core::matrix::Matrix;
use microagg_core::metrics::{diversity_check, k_anonymity_check};
use microagg_core::{
    anonymize, AnonymizationConfig, AttributeSchema, ClassAssignment, Method, Microdata, Role,
};

fn blobs(centers: Vec<Vec<f64>>, n: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let syn = synthesize(&SynthSpec {
        n,
        qid_blob_centers: centers,
        conf_class_centers: vec![vec![0.0]],
        noise_scale: 1.0,
        seed,
    })
    .unwrap();
    (
        syn.data.project(Role::QuasiIdentifier).unwrap().data,
        syn.blob_labels,
    )
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let n = a.len();
    (0..n).all(|i| (0..n).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

fn three_blobs(seed: u64) -> (Matrix, Vec<usize>) {
    blobs(
        vec![vec![0.0, 0.0], vec![25.0, 0.0], vec![12.0, 22.0]],
        150,
        seed,
    )
}

#[test]
fn three_blobs_recovered() {
    let (data, truth) = three_blobs(11);
    let sel = select_partition(&data, (2, 6), &FuzzinessParams::default()).unwrap();
    assert_eq!(sel.model.c, 3);
    assert!(same_partition(&sel.hard_labels, &truth));
}

#[test]
fn one_blob_picks_smallest_c() {
    let (one, _) = blobs(vec![vec![5.0, 5.0]], 150, 12);
    let params = FuzzinessParams::default();
    let sel = select_partition(&one, (2, 4), &params).unwrap();
    let scores: Vec<_> = sel.scores.clone();
    assert_eq!(sel.model.c, 2, "scores {scores:?}");

    let (three, _) = three_blobs(12);
    let best_three = select_partition(&three, (2, 4), &params).unwrap();
    let top = |s: &[(usize, Option<f64>)]| {
        s.iter()
            .filter_map(|x| x.1)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    assert!(top(&scores) < top(&best_three.scores));
}

#[test]
fn translation_equivariant() {
    let (data, _) = three_blobs(13);
    let shift = [123.0, -45.5];
    let mut moved = data.clone();
    for i in 0..moved.nrows() {
        for (j, s) in shift.iter().enumerate() {
            moved.set(i, j, data.get(i, j) + s);
        }
    }
    let params = FuzzinessParams::default();
    let a = fp_cluster(&data, 3, &params).unwrap();
    let b = fp_cluster(&moved, 3, &params).unwrap();
    for j in 0..3 {
        for (d, s) in shift.iter().enumerate() {
            assert!((a.centers.get(j, d) + s - b.centers.get(j, d)).abs() < 1e-7);
        }
    }
    for (x, y) in a.u.as_slice().iter().zip(b.u.as_slice()) {
        assert!((x - y).abs() < 1e-7);
    }
    for (x, y) in a.t.as_slice().iter().zip(b.t.as_slice()) {
        assert!((x - y).abs() < 1e-7);
    }
}

#[test]
fn fp_cluster_deterministic() {
    let (data, _) = three_blobs(14);
    let params = FuzzinessParams::default();
    let a = fp_cluster(&data, 4, &params).unwrap();
    let b = fp_cluster(&data, 4, &params).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert!(pcaes(&data, &a).unwrap().is_finite());
}

#[test]
fn duplicated_points_stay_finite() {
    let data = Matrix::from_rows(&vec![vec![1.0, 2.0]; 6]).unwrap();
    let model = fp_cluster(&data, 2, &FuzzinessParams::default()).unwrap();
    assert!(model
        .u
        .as_slice()
        .iter()
        .chain(model.t.as_slice())
        .all(|v| v.is_finite()));
}

// Heart=0, Viral=1, Cancer=2
const TABLE1: [[f64; 3]; 12] = [
    [2025.0, 28.0, 0.0],
    [2022.0, 29.0, 0.0],
    [2022.0, 25.0, 1.0],
    [2020.0, 24.0, 1.0],
    [1012.0, 50.0, 2.0],
    [1012.0, 55.0, 0.0],
    [1013.0, 47.0, 1.0],
    [1013.0, 49.0, 1.0],
    [1023.0, 31.0, 2.0],
    [1022.0, 34.0, 2.0],
    [1021.0, 35.0, 2.0],
    [1021.0, 37.0, 2.0],
];

#[test]
fn table1_single_sub_is_diverse() {
    let schema = AttributeSchema::from_pairs(&[
        ("ZIPcode", Role::QuasiIdentifier),
        ("Age", Role::QuasiIdentifier),
        ("Disease", Role::Confidential),
    ])
    .unwrap();
    let md = Microdata::from_rows(schema, &TABLE1.map(|r| r.to_vec())).unwrap();
    let mut config = AnonymizationConfig::new(Method::HmPfsom, 1);
    config.qid_c_range = Some((1, 1));
    let res = anonymize(&md, &config).unwrap();
    let disease = ClassAssignment::global(TABLE1.iter().map(|r| r[2] as usize).collect());
    let cs: Vec<usize> = res
        .sub_structure
        .as_ref()
        .unwrap()
        .iter()
        .map(|s| s.cs)
        .collect();
    assert!(
        diversity_check(&res.partition, &disease).unwrap(),
        "classes per sub {cs:?}, groups {:?}",
        res.partition.groups()
    );
    assert!(k_anonymity_check(&res.masked, 1).holds);
}

#[test]
fn two_blob_two_class_groups() {
    let syn = synthesize(&SynthSpec {
        n: 200,
        qid_blob_centers: vec![vec![0.0, 0.0], vec![40.0, 40.0]],
        conf_class_centers: vec![vec![0.0], vec![60.0]],
        noise_scale: 1.5,
        seed: 21,
    })
    .unwrap();
    let res = anonymize(&syn.data, &AnonymizationConfig::new(Method::HmPfsom, 3)).unwrap();
    let labels = res.partition.labels();
    for sub in res.sub_structure.as_ref().unwrap() {
        let min_class = *sub.class_sizes.iter().min().unwrap();
        assert_eq!(sub.groups, min_class / 3);
        // classes found agree with the generator's classes
        let truth: Vec<usize> = sub.members.iter().map(|&r| syn.class_labels[r]).collect();
        assert!(same_partition(&sub.class_labels, &truth));
        for &r in &sub.members {
            let g = labels[r];
            for c in 0..sub.cs {
                let count = sub
                    .members
                    .iter()
                    .zip(&sub.class_labels)
                    .filter(|&(&m, &l)| labels[m] == g && l == c)
                    .count();
                assert!(count >= 3);
            }
        }
    }
    assert!(k_anonymity_check(&res.masked, 3).holds);
}
