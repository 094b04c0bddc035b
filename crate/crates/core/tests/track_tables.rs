use saddlecross::io::{
    read_events, read_saddles, read_track, write_events, write_saddles, write_track, SaddleRow,
    TrackRow,
};
use saddlecross::model::{Mode, PhysicalSystem, PotentialSpec};
use saddlecross::saddles::{find_all_real_saddles, NewtonOptions, RealScan, SaddleKind};
use saddlecross::semiclassics::uniform_grid;
use saddlecross::tracking::{track, EventKind, TrackOptions};

fn rm() -> PhysicalSystem {
    PhysicalSystem::new(
        1.0,
        0.5,
        PotentialSpec::rosen_morse(1.0),
        Mode::FixedEnergy { energy: 0.9 },
        -5.0,
    )
    .unwrap()
}

#[test]
fn direct_family_events_in_order() {
    let sys = rm();
    let real = find_all_real_saddles(
        &sys,
        -2.0,
        &RealScan::default_for(&sys, -2.0),
        &NewtonOptions::default(),
    )
    .unwrap();
    let direct = real
        .iter()
        .find(|s| s.kind == SaddleKind::RealDirect)
        .unwrap();
    let rec = track(
        &sys,
        direct,
        &uniform_grid(-2.0, 1.0, 0.02),
        &TrackOptions::default(),
    )
    .unwrap();
    let kinds: Vec<EventKind> = rec.events.iter().map(|e| e.kind).collect();
    assert_eq!(
        kinds,
        [
            EventKind::Fold,
            EventKind::SingularityCrossing,
            EventKind::ComplexCaustic
        ]
    );
    // crossing and complex caustic sit right of the fold
    let xs: Vec<f64> = rec.events.iter().map(|e| e.x1).collect();
    assert!(xs.windows(2).all(|w| w[0] < w[1]), "{xs:?}");
    assert!(rec.states.iter().all(|s| s.relevant));

    let rows: Vec<TrackRow> = rec
        .states
        .iter()
        .map(|s| TrackRow {
            x1: s.x1,
            ctrl: s.ctrl.value(),
            action: s.action,
            crossings: s.branch.crossing_count,
            relevant: s.relevant,
            events: Vec::new(),
        })
        .collect();
    let mut buf = Vec::new();
    write_track(&mut buf, &rows).unwrap();
    assert_eq!(read_track(buf.as_slice()).unwrap(), rows);

    let mut buf = Vec::new();
    write_events(&mut buf, &rec.events).unwrap();
    assert_eq!(read_events(buf.as_slice()).unwrap(), rec.events);

    let saddles: Vec<SaddleRow> = real.iter().map(SaddleRow::from).collect();
    let mut buf = Vec::new();
    write_saddles(&mut buf, &saddles).unwrap();
    assert_eq!(read_saddles(buf.as_slice()).unwrap(), saddles);
}
