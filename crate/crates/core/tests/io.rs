use std::io::Cursor;

use immersa::io::*;
use immersa::{DiscretePath, Error, SurfaceSpec};

#[test]
fn gif1_round_trip_is_exact() {
    let f = SurfaceSpec::bumpy_default(4).generate(16).unwrap();
    let mut buf = Vec::new();
    write_gif1(&mut buf, &f).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("GIF1 16 16 3\n"));
    assert_eq!(text.lines().count(), 1 + 256);
    let g = read_gif1(&mut Cursor::new(buf), 4).unwrap();
    assert_eq!(f, g);
}

#[test]
fn gib1_round_trip_is_exact() {
    let f = SurfaceSpec::Clifford.generate(8).unwrap();
    let mut buf = Vec::new();
    write_gib1(&mut buf, &f).unwrap();
    assert_eq!(buf.len(), "GIB1 8 8 4\n".len() + 64 * 4 * 8);
    assert_eq!(read_gib1(&mut Cursor::new(buf.clone()), 4).unwrap(), f);
    buf.truncate(buf.len() - 1);
    assert!(matches!(read_gib1(&mut Cursor::new(buf), 4), Err(Error::Parse(_))));
}

#[test]
fn gpf1_round_trip() {
    let f0 = SurfaceSpec::RoundTorus { big: 2.0, small: 1.0 }.generate(8).unwrap();
    let f1 = f0.translated(&[1.0, 0.0, 0.5]);
    let p = DiscretePath::linear(&f0, &f1, 3).unwrap();
    let mut buf = Vec::new();
    write_gpf1(&mut buf, &p).unwrap();
    assert!(buf.starts_with(b"GPF1 3 8 8 3\n"));
    let q = read_gpf1(&mut Cursor::new(buf), 4).unwrap();
    assert_eq!(q.slices(), p.slices());
}

#[test]
fn malformed_inputs_are_rejected() {
    for text in [
        "GIF2 8 8 3\n",
        "GIF1 8 8\n",
        "GIF1 8 8 3\n1 2 3\n",
        "GIF1 7 8 3\n",
        "GIF1 8 8 3 1\n",
    ] {
        assert!(read_gif1(&mut Cursor::new(text.as_bytes()), 4).is_err(), "{text}");
    }
    let mut body = String::from("GIF1 8 8 3\n");
    for _ in 0..64 {
        body.push_str("1 2\n");
    }
    assert!(matches!(read_gif1(&mut Cursor::new(body.as_bytes()), 4), Err(Error::Parse(_))));
}

#[test]
fn obj_counts_and_round_trip() {
    let f = SurfaceSpec::RoundTorus { big: 2.0, small: 1.0 }.generate(16).unwrap();
    let mut buf = Vec::new();
    export_obj(&mut buf, &f).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let verts: Vec<f64> = text
        .lines()
        .filter(|l| l.starts_with("v "))
        .flat_map(|l| l[2..].split_whitespace().map(|t| t.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .collect();
    assert_eq!(verts.len(), 256 * 3);
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 512);
    assert_eq!(verts, f.positions().values());
    let max_index = text
        .lines()
        .filter(|l| l.starts_with("f "))
        .flat_map(|l| l[2..].split_whitespace().map(|t| t.parse::<usize>().unwrap()).collect::<Vec<_>>())
        .max()
        .unwrap();
    assert_eq!(max_index, 256);
    let c = SurfaceSpec::Clifford.generate(8).unwrap();
    assert!(matches!(export_obj(&mut Vec::new(), &c), Err(Error::UnsupportedAmbientDim(4))));
}

#[test]
fn files_on_disk() {
    let dir = std::env::temp_dir().join(format!("immersa-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = SurfaceSpec::Clifford.generate(8).unwrap();
    let a = dir.join("a.gif");
    let b = dir.join("b.gib");
    save_with(&a, |w| write_gif1(w, &f)).unwrap();
    save_with(&b, |w| write_gib1(w, &f)).unwrap();
    assert_eq!(load_immersion(&a, 4).unwrap(), f);
    assert_eq!(load_immersion(&b, 4).unwrap(), f);
    assert!(matches!(load_immersion(&dir.join("missing"), 4), Err(Error::Io(_))));
    std::fs::remove_dir_all(&dir).unwrap();
}
