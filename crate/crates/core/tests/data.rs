use dbal_core::data::*;
use dbal_core::Error;
use ndarray::Array2;
use proptest::prelude::*;

fn small_multilabel(seed: u64, videos: usize, frames: usize, noise: f64) -> Dataset {
    let mut spec = MultiLabelTaskSpec::desk_scale();
    spec.videos = videos;
    spec.frames_per_video = frames;
    spec.noise = noise;
    generate_multilabel(&spec, seed).unwrap()
}

#[test]
fn empirical_prevalence_within_binomial_bounds() {
    let mut spec = MultiLabelTaskSpec::desk_scale();
    spec.prevalence[0] = 0.5;
    spec.videos = 50;
    spec.frames_per_video = 200;
    let data = generate_multilabel(&spec, 3).unwrap();
    let n = data.frame_count() as f64;
    for (c, &p) in spec.prevalence.iter().enumerate() {
        let hits = data
            .videos
            .iter()
            .flat_map(|v| &v.labels)
            .filter(|l| l.has_class(c))
            .count() as f64;
        let sd = (n * p * (1.0 - p)).sqrt();
        assert!((hits - n * p).abs() <= 3.0 * sd, "class {c}: {hits} vs {}", n * p);
    }
}

#[test]
fn default_multilabel_task_shape() {
    let spec = MultiLabelTaskSpec::desk_scale();
    assert_eq!((spec.classes, spec.videos, spec.frames_per_video), (7, 60, 200));
    assert_eq!(spec.prevalence.iter().filter(|&&p| p <= 0.05).count(), 2);
    let data = generate_multilabel(&spec, 0).unwrap();
    let (train, test) = data.split();
    assert_eq!((train.len(), test.len()), (45, 15));
}

#[test]
fn phase_dwell_times_follow_the_chain() {
    let mut spec = PhaseTaskSpec::desk_scale();
    spec.videos = 1000;
    let data = generate_phases(&spec, 5).unwrap();
    let c = spec.phases;
    let mut runs = vec![Vec::new(); c];
    for v in &data.videos {
        let phases: Vec<usize> = v
            .labels
            .iter()
            .map(|l| match l {
                FrameLabel::Phase(p) => *p,
                FrameLabel::Multi(_) => unreachable!(),
            })
            .collect();
        assert!(
            phases.windows(2).all(|w| w[0] <= w[1]),
            "forward chain must not go back"
        );
        let mut start = 0;
        for i in 1..=phases.len() {
            if i == phases.len() || phases[i] != phases[start] {
                runs[phases[start]].push((i - start) as f64);
                start = i;
            }
        }
    }
    for k in 0..c {
        assert!(!runs[k].is_empty(), "phase {k} never occurs");
        let mean = runs[k].iter().sum::<f64>() / runs[k].len() as f64;
        let want = 1.0 / (1.0 - spec.transitions[[k, k]]);
        assert!((mean - want).abs() <= 0.1 * want, "phase {k}: dwell {mean} vs {want}");
    }
}

#[test]
fn oracle_replays_and_rejects_unknown() {
    let data = small_multilabel(1, 3, 20, 0.3);
    let oracle = OracleReplay::new(&data);
    let f = FrameRef { video: 2, index: 7 };
    assert_eq!(oracle.label(f).unwrap(), &data.videos[2].labels[7]);
    assert_eq!(oracle.label(f).unwrap(), oracle.label(f).unwrap());
    assert!(matches!(
        oracle.label(FrameRef { video: 9, index: 0 }),
        Err(Error::UnknownItem(_))
    ));
    assert!(oracle.label(FrameRef { video: 0, index: 20 }).is_err());
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.balds");
    for data in [small_multilabel(2, 4, 15, 0.5), {
        let mut s = PhaseTaskSpec::desk_scale();
        s.videos = 4;
        generate_phases(&s, 2).unwrap()
    }] {
        save_dataset(&data, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back.task, data.task);
        assert_eq!(back.videos.len(), data.videos.len());
        for (a, b) in back.videos.iter().zip(&data.videos) {
            assert_eq!(a.labels, b.labels);
            for (x, y) in a.features.iter().zip(&b.features) {
                assert!((x - y).abs() <= 1e-8 * y.abs().max(1e-300));
            }
        }
    }
}

#[test]
fn truncated_file_reports_position() {
    let text = write_dataset(&small_multilabel(3, 2, 5, 0.1)).unwrap();
    let cut = &text[..text.len() / 2];
    match parse_dataset(cut) {
        Err(Error::Parse { line, .. }) => assert!(line > 0),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..4, 1usize..4, 1usize..4, any::<bool>()).prop_flat_map(|(features, classes, videos, phase)| {
        let video = (1usize..6).prop_flat_map(move |len| {
            (
                proptest::collection::vec(-1e6f64..1e6, len * features),
                proptest::collection::vec(proptest::collection::vec(0u8..2, classes), len),
                proptest::collection::vec(0usize..classes, len),
            )
        });
        proptest::collection::vec(video, videos).prop_map(move |vs| Dataset {
            task: if phase { TaskKind::Phase } else { TaskKind::MultiLabel },
            features,
            classes,
            videos: vs
                .into_iter()
                .enumerate()
                .map(|(id, (x, multi, ph))| {
                    let len = ph.len();
                    Video {
                        id,
                        features: Array2::from_shape_vec((len, features), x).unwrap(),
                        labels: if phase {
                            ph.into_iter().map(FrameLabel::Phase).collect()
                        } else {
                            multi.into_iter().map(FrameLabel::Multi).collect()
                        },
                    }
                })
                .collect(),
        })
    })
}

proptest! {
    #[test]
    fn text_format_round_trips(data in arb_dataset()) {
        let text = write_dataset(&data).unwrap();
        let back = parse_dataset(&text).unwrap();
        prop_assert_eq!(back.task, data.task);
        prop_assert_eq!(back.features, data.features);
        prop_assert_eq!(back.classes, data.classes);
        prop_assert_eq!(back.videos.len(), data.videos.len());
        for (a, b) in back.videos.iter().zip(&data.videos) {
            prop_assert_eq!(a.id, b.id);
            prop_assert_eq!(&a.labels, &b.labels);
            for (x, y) in a.features.iter().zip(&b.features) {
                prop_assert!((x - y).abs() <= 1e-8 * y.abs().max(1e-300));
            }
        }
        // writing is a function of content
        prop_assert_eq!(write_dataset(&back).unwrap(), text);
    }
}
