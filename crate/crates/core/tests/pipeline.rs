mod common;

use common::{canonical, scene};
use hpcs::color::rgb_to_lab_normalized;
use hpcs::gridgraph::Connectivity;
use hpcs::hierarchy::{coarsen, ingest_label_map, run_hierarchy, run_pixel_level, LevelConfig, PipelineOptions};
use hpcs::imgio::{self, LabelMap};
use hpcs::metrics::boundary_mask;
use hpcs::{RgbImage, Shape};
use image::{ImageBuffer, Rgb};

fn opts() -> PipelineOptions {
    PipelineOptions { restarts: 3, ..PipelineOptions::default() }
}

#[test]
fn region_ids_follow_first_pixel() {
    let (img, _) = scene(80, 60, 12, 15.0, 1);
    let lab = rgb_to_lab_normalized(&img);
    let levels = [LevelConfig::with_target(16, 0.1, 150), LevelConfig::unconstrained(8, 0.1)];
    for level in run_hierarchy(&lab, &levels, &opts()).unwrap().levels {
        let map = level.rag.pixel_map();
        assert_eq!(map, canonical(map).as_slice());
    }
}

#[test]
fn coarsening_a_previous_output_is_the_next_level() {
    let (img, _) = scene(80, 60, 12, 15.0, 2);
    let lab = rgb_to_lab_normalized(&img);
    let levels = [LevelConfig::with_target(16, 0.1, 150), LevelConfig::unconstrained(8, 0.1)];
    let res = run_hierarchy(&lab, &levels, &opts()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("level1.csv");
    imgio::write_rag_label_map(&res.levels[0].rag, &path).unwrap();
    let ids = imgio::read_label_map(&path).unwrap().ids;
    let (base, out) = coarsen(&ids, &lab, &levels[1], &opts()).unwrap();
    assert_eq!(base.region_count(), res.levels[0].rag.region_count());
    assert_eq!(out.rag.pixel_map(), res.levels[1].rag.pixel_map());
    assert!(out.rag.region_count() < base.region_count());
}

#[test]
fn single_level_hierarchy_matches_segment() {
    let (img, _) = scene(48, 40, 8, 10.0, 3);
    let lab = rgb_to_lab_normalized(&img);
    let cfg = LevelConfig::with_target(16, 0.1, 40);
    let seg = run_pixel_level(&lab, &cfg, &opts()).unwrap();
    let hier = run_hierarchy(&lab, &[cfg], &opts()).unwrap();
    assert_eq!(hier.levels.len(), 1);
    assert_eq!(hier.levels[0].rag, seg.rag);
}

#[test]
fn constant_image_stays_one_region() {
    let img = RgbImage::new(Shape::new_2d(20, 20), vec![[90, 140, 30]; 400]).unwrap();
    let lab = rgb_to_lab_normalized(&img);
    let levels = [LevelConfig::unconstrained(16, 0.1), LevelConfig::unconstrained(8, 0.1), LevelConfig::unconstrained(4, 0.1)];
    let res = run_hierarchy(&lab, &levels, &opts()).unwrap();
    for l in &res.levels {
        assert_eq!(l.rag.region_count(), 1);
    }
    res.check_refinement().unwrap();
}

#[test]
fn ingest_csv_halves() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("halves.csv");
    std::fs::write(&path, "0,0,1,1\n0,0,1,1\n0,0,1,1\n").unwrap();
    let map = imgio::read_label_map(&path).unwrap();
    let img = RgbImage::new(Shape::new_2d(4, 3), vec![[10, 10, 10]; 12]).unwrap();
    let rag = ingest_label_map(&map.ids, &rgb_to_lab_normalized(&img), Connectivity::Four).unwrap();
    assert_eq!(rag.region_count(), 2);
    assert_eq!(rag.adjacency(), &[(0, 1)]);
}

#[test]
fn volume_from_slices() {
    let dir = tempfile::tempdir().unwrap();
    for z in 0..4u8 {
        let buf: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_fn(10, 8, |x, _| {
            if x < 5 { Rgb([200, 30, 30]) } else { Rgb([30, 30, 200 - z]) }
        });
        buf.save(dir.path().join(format!("slice_{z:02}.png"))).unwrap();
    }
    let vol = imgio::read_volume(dir.path()).unwrap();
    assert_eq!(vol.shape(), Shape::new_3d(10, 8, 4));
    let lab = rgb_to_lab_normalized(&vol);
    let out = run_pixel_level(&lab, &LevelConfig::unconstrained(4, 0.1), &opts()).unwrap();
    assert_eq!(out.rag.region_count(), 2);
    let map = LabelMap::from_rag(&out.rag);
    assert_eq!((map.width, map.height), (10, 32));
}

#[test]
fn overlay_marks_exactly_the_boundary() {
    let (img, _) = scene(40, 30, 7, 20.0, 4);
    let lab = rgb_to_lab_normalized(&img);
    let out = run_pixel_level(&lab, &LevelConfig::with_target(16, 0.1, 30), &opts()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (ov, bd) = (dir.path().join("o.png"), dir.path().join("b.png"));
    imgio::write_overlay(&img, &out.rag, &ov, Some(&bd)).unwrap();

    let w = 40;
    let ids = out.rag.pixel_map();
    let naive: Vec<bool> = (0..ids.len())
        .map(|i| {
            let (x, y) = (i % w, i / w);
            (x > 0 && ids[i - 1] != ids[i])
                || (x + 1 < w && ids[i + 1] != ids[i])
                || (y > 0 && ids[i - w] != ids[i])
                || (y + 1 < 30 && ids[i + w] != ids[i])
        })
        .collect();
    assert_eq!(boundary_mask(&LabelMap::from_rag(&out.rag)), naive);
    let bw = image::open(&bd).unwrap().into_luma8();
    let marked: Vec<bool> = bw.pixels().map(|p| p.0[0] == 255).collect();
    assert_eq!(marked, naive);
    let painted = imgio::read_image(&ov).unwrap();
    for (i, (p, q)) in painted.pixels().iter().zip(img.pixels()).enumerate() {
        if naive[i] {
            assert_eq!(*p, imgio::BOUNDARY_COLOR);
        } else {
            assert_eq!(p, q);
        }
    }
}

#[test]
fn rag_summary_lists_every_region() {
    let img = RgbImage::new(Shape::new_2d(4, 2), (0..8).map(|i| if i % 4 < 2 { [250, 0, 0] } else { [0, 0, 250] }).collect()).unwrap();
    let out = run_pixel_level(&rgb_to_lab_normalized(&img), &LevelConfig::unconstrained(4, 0.1), &opts()).unwrap();
    let text = imgio::rag_summary(&out.rag);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "id,size,label,mean0,mean1,mean2");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,4,") && lines[2].starts_with("1,4,"));
}
