use std::collections::BTreeSet;

use approx::assert_relative_eq;

use super::*;
use crate::error::Error;
use crate::geometry::{
    element_metric, metric_compose, metric_decompose, AnisotropyParams, MetricTensor, Triangulation,
};

fn two_triangles() -> Triangulation {
    Triangulation::new(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![[0, 1, 2], [0, 2, 3]],
        &[(0, 1, 1), (1, 2, 2), (2, 3, 3), (3, 0, 4)],
    )
    .unwrap()
}

fn section_count(text: &str, name: &str) -> usize {
    let mut lines = text.lines();
    while let Some(l) = lines.next() {
        if l.trim() == name {
            return lines.next().unwrap().trim().parse().unwrap();
        }
    }
    panic!("no section {name}")
}

#[test]
fn two_triangle_fixture() {
    let text = mesh_to_bamg(&two_triangles());
    assert_eq!(section_count(&text, "Vertices"), 4);
    assert_eq!(section_count(&text, "Triangles"), 2);
    assert_eq!(section_count(&text, "Edges"), 4);
    assert!(text.contains("\n1 2 3 0\n"));
    assert!(text.trim_end().ends_with("End"));
}

#[test]
fn identity_metric_row() {
    assert_eq!(metric_to_bamg(&[MetricTensor::IDENTITY; 2]), "2 3\n1 0 1\n1 0 1\n");
}

#[test]
fn roundtrip_and_byte_stability() {
    let mesh = Triangulation::lshape(2).unwrap();
    let metrics: Vec<MetricTensor> = mesh
        .vertices()
        .iter()
        .map(|p| MetricTensor::new(1.0 + p[0] * p[0], 0.1 * p[1], 2.0 + 1.0 / 3.0).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("m");
    interchange_write(&mesh, &metrics, &prefix).unwrap();
    let (back, mtr) = interchange_read(&prefix).unwrap();
    assert_eq!(back.vertices(), mesh.vertices());
    assert_eq!(back.triangles(), mesh.triangles());
    let tags = |m: &Triangulation| m.boundary_edges().into_iter().collect::<BTreeSet<_>>();
    assert_eq!(tags(&back), tags(&mesh));
    assert_eq!(mtr.unwrap(), metrics);
    let again = bundle(&back, &metrics).unwrap();
    assert_eq!(again, bundle(&mesh, &metrics).unwrap());
}

fn parse_err(text: &str) -> (usize, String) {
    match parse_bamg_mesh(text, "x.mesh") {
        Err(Error::Parse { line, msg, .. }) => (line, msg),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn malformed_mesh_reports_line() {
    let good = mesh_to_bamg(&two_triangles());
    let bad = good.replacen("1 0 1\n", "1 zero 1\n", 1);
    let (line, msg) = parse_err(&bad);
    assert_eq!(line, 8);
    assert!(msg.contains("zero"));
    let (line, _) = parse_err(&good.replace("1 3 4 0", "1 3 9 0"));
    assert!(line > 0);
    let (_, msg) = parse_err(&good.replace("End", ""));
    assert!(msg.contains("End"));
    let (line, msg) = parse_err("Dimension 2\nCorners\n0\nEnd\n");
    assert_eq!((line, msg.contains("Corners")), (2, true));
}

#[test]
fn non_spd_metric_row_is_rejected() {
    match parse_bamg_metric("2 3\n1 0 1\n1 2 1\n", "x.mtr") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(parse_bamg_metric("1 2\n1 0\n", "x.mtr").is_err());
    let bad = vec![MetricTensor { m11: -1.0, m12: 0.0, m22: 1.0 }; 4];
    assert!(bundle(&two_triangles(), &bad).is_err());
}

/// Vertex metrics reproducing the current element sizes.
fn matching_metrics(mesh: &Triangulation) -> Vec<MetricTensor> {
    let em: Vec<MetricTensor> = (0..mesh.num_triangles())
        .map(|k| element_metric(mesh.corners(k), 3.0).unwrap())
        .collect();
    mesh.vertex_triangles()
        .iter()
        .map(|ks| {
            let items: Vec<_> = ks.iter().map(|&k| (1.0, em[k])).collect();
            MetricTensor::log_euclidean_mean(&items).unwrap()
        })
        .collect()
}

fn check_valid(out: &Triangulation, like: &Triangulation) {
    assert_relative_eq!(out.total_area(), like.total_area(), max_relative = 1e-12);
    let tags = |m: &Triangulation| m.boundary_edges().iter().map(|e| e.2).collect::<BTreeSet<_>>();
    assert_eq!(tags(out), tags(like));
    for (a, b, tag) in out.boundary_edges() {
        for v in [a, b] {
            let p = out.vertex(v);
            let on = p[0].abs() < 1e-12 || p[1].abs() < 1e-12 || (p[0] - 1.0).abs() < 1e-12 || (p[1] - 1.0).abs() < 1e-12;
            assert!(on, "boundary vertex {p:?} left the boundary");
        }
        let m = [0.5 * (out.vertex(a)[0] + out.vertex(b)[0]), 0.5 * (out.vertex(a)[1] + out.vertex(b)[1])];
        let expect = if m[1] < 1e-12 { 1 } else if m[0] > 1.0 - 1e-12 { 2 } else if m[1] > 1.0 - 1e-12 { 3 } else { 4 };
        assert_eq!(tag, expect);
    }
}

#[test]
fn matching_metric_is_near_fixed_point() {
    let mesh = Triangulation::unit_square(8).unwrap();
    let out = remesh_internal(&mesh, &matching_metrics(&mesh)).unwrap();
    let ratio = out.mesh.num_triangles() as f64 / mesh.num_triangles() as f64;
    assert!((0.8..=1.2).contains(&ratio), "ratio {ratio}");
    check_valid(&out.mesh, &mesh);
}

#[test]
fn quadrupled_density_quadruples_elements() {
    let mesh = Triangulation::unit_square(6).unwrap();
    let metrics: Vec<MetricTensor> = matching_metrics(&mesh).iter().map(|m| m.scaled(4.0)).collect();
    let out = remesh_internal(&mesh, &metrics).unwrap();
    let ratio = out.mesh.num_triangles() as f64 / mesh.num_triangles() as f64;
    assert!((2.8..=5.2).contains(&ratio), "ratio {ratio}");
    check_valid(&out.mesh, &mesh);
    assert!(!out.stalled && out.in_band >= 0.9, "{} {}", out.in_band, out.sweeps);
}

#[test]
fn anisotropic_metric_stretches_elements() {
    let mesh = Triangulation::unit_square(8).unwrap();
    let d = 3f64.sqrt() * 3.0 / 4.0 * 128.0;
    let m = metric_compose(&AnisotropyParams::new(0.0, 10.0, d).unwrap());
    let out = remesh_internal(&mesh, &vec![m; mesh.num_vertices()]).unwrap();
    check_valid(&out.mesh, &mesh);
    let mut beta: Vec<f64> = (0..out.mesh.num_triangles())
        .map(|k| metric_decompose(&element_metric(out.mesh.corners(k), 3.0).unwrap()).unwrap().beta)
        .collect();
    beta.sort_by(f64::total_cmp);
    let median = beta[beta.len() / 2];
    assert!(median >= 3.0, "median aspect {median}");
}

#[test]
fn isotropic_graded_field_lands_in_band() {
    let mesh = Triangulation::unit_square(8).unwrap();
    let metrics: Vec<MetricTensor> = mesh
        .vertices()
        .iter()
        .map(|p| {
            let d = 200.0 * (1.0 + 4.0 * p[0]);
            metric_compose(&AnisotropyParams::new(0.0, 1.0, d).unwrap())
        })
        .collect();
    let out = remesh_internal(&mesh, &metrics).unwrap();
    check_valid(&out.mesh, &mesh);
    assert!(out.in_band >= 0.9, "{}", out.in_band);
}

#[test]
fn remesh_is_deterministic() {
    let mesh = Triangulation::unit_square(5).unwrap();
    let m = metric_compose(&AnisotropyParams::new(0.6, 4.0, 300.0).unwrap());
    let a = remesh_internal(&mesh, &vec![m; mesh.num_vertices()]).unwrap();
    let b = remesh_internal(&mesh, &vec![m; mesh.num_vertices()]).unwrap();
    assert_eq!(a.mesh.to_native(), b.mesh.to_native());
}

#[test]
fn orders_transfer_identity_and_uniform() {
    let mesh = Triangulation::lshape(2).unwrap();
    let p: Vec<usize> = (0..mesh.num_triangles()).map(|k| 1 + k % 5).collect();
    assert_eq!(transfer_orders(&mesh, &p, &mesh), p);
    let fine = Triangulation::lshape(3).unwrap();
    assert!(transfer_orders(&mesh, &vec![4; mesh.num_triangles()], &fine).iter().all(|&q| q == 4));
}

#[test]
fn orders_follow_containment_across_split() {
    let old = Triangulation::unit_square(1).unwrap();
    let new = Triangulation::unit_square(2).unwrap();
    assert_eq!((old.num_triangles(), new.num_triangles()), (2, 8));
    // old triangle 0 lies below the diagonal y = x
    let p = transfer_orders(&old, &[2, 5], &new);
    for k in 0..new.num_triangles() {
        let c = new.centroid(k);
        assert_eq!(p[k], if c[1] < c[0] { 2 } else { 5 });
    }
}
