//! One function per subcommand. Files are written as soon as they are
//! complete, so a numerical failure leaves the finished tables in place.

use crate::config::{
    ChainTask, CompareTask, DiscreteTask, LandscapeTask, RunConfig, SaddlesTask, StartSpec,
    TaskConfig, TrackTask,
};
use crate::plot::{script, Panel, Series};
use crate::CliError;
use rayon::prelude::*;
use saddlecross::dynamics::{integrate_ivp, ControlParameter, IvpOptions};
use saddlecross::exactprop::exact_energy_propagator;
use saddlecross::io::{self, fmt_f64, CompareRow, SaddleRow, TrackRow};
use saddlecross::landscape::{
    detect_branch_cuts, divergence_sites, extract_level_curves, scan, LandscapeGrid, LevelSpec,
};
use saddlecross::lattice::{discrete_landscape, discrete_newton, discrete_track};
use saddlecross::model::PhysicalSystem;
use saddlecross::saddles::{
    find_all_real_saddles, newton_solve, CoordinateMode, NewtonOptions, RealScan, Saddle,
};
use saddlecross::semiclassics::{comparison_curve, uniform_grid, ApproxMode, CompareOptions};
use saddlecross::tracking::{track_partial, TrackOptions};
use saddlecross::{Complex64, Error};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

struct Output<'a> {
    dir: &'a Path,
    figure: &'a str,
    written: Vec<PathBuf>,
}

impl Output<'_> {
    fn name(&self, suffix: &str) -> String {
        format!("{}{suffix}.csv", self.figure)
    }

    fn create(&mut self, file: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(file);
        let f = File::create(&path)?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    fn plot(&mut self, panels: &[Panel]) -> Result<(), CliError> {
        let path = self.dir.join(format!("{}.plot", self.figure));
        std::fs::write(&path, script(self.figure, panels))?;
        self.written.push(path);
        Ok(())
    }
}

/// Run the configured task, writing into `out_dir`; returns the files written.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let sys = cfg.system.build()?;
    std::fs::create_dir_all(out_dir)?;
    let mut out = Output {
        dir: out_dir,
        figure: &cfg.output.figure,
        written: Vec::new(),
    };
    let panels = match &cfg.task {
        TaskConfig::Landscape(t) => cmd_landscape(&sys, t, &mut out)?,
        TaskConfig::Track(t) => cmd_track(&sys, t, &mut out)?,
        TaskConfig::Compare(t) => cmd_compare(&sys, t, &mut out)?,
        TaskConfig::Discrete(t) => cmd_discrete(&sys, t, &mut out)?,
        TaskConfig::Saddles(t) => cmd_saddles(&sys, t, &mut out)?,
    };
    if cfg.output.plot {
        out.plot(&panels)?;
    }
    Ok(out.written)
}

fn level_tag(k: usize, level: &LevelSpec) -> String {
    match level {
        LevelSpec::ImZero => format!("_level{k}_im0"),
        LevelSpec::ReLevel(_) => format!("_level{k}_re"),
    }
}

/// Grid, level curves and cut chains of one landscape panel.
fn write_panel(
    grid: &LandscapeGrid,
    levels: &[LevelSpec],
    cuts: &saddlecross::landscape::CutOptions,
    tag: &str,
    out: &mut Output,
) -> Result<Panel, CliError> {
    let file = out.name(tag);
    io::write_landscape(out.create(&file)?, grid)?;
    let mut series = Vec::new();
    for (k, level) in levels.iter().enumerate() {
        let curves = match extract_level_curves(grid, *level) {
            Ok(c) => c.into_iter().map(|c| c.points).collect(),
            Err(Error::EmptyContour) => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let f = out.name(&format!("{tag}{}", level_tag(k, level)));
        io::write_polylines(out.create(&f)?, &curves)?;
        series.push(Series::new(
            f,
            "re_ctrl",
            "im_ctrl",
            format!("{level:?}"),
            "dots",
        ));
    }
    let chains: Vec<Vec<Complex64>> = detect_branch_cuts(grid, cuts)
        .into_iter()
        .map(|c| c.points)
        .collect();
    let f = out.name(&format!("{tag}_cuts"));
    io::write_polylines(out.create(&f)?, &chains)?;
    series.push(Series::new(
        f,
        "re_ctrl",
        "im_ctrl",
        "cuts",
        "points pt 7 ps 0.3",
    ));
    Ok(Panel {
        title: tag.trim_start_matches('_').to_string(),
        xlabel: "Re ctrl",
        ylabel: "Im ctrl",
        series,
    })
}

fn cmd_landscape(
    sys: &PhysicalSystem,
    t: &LandscapeTask,
    out: &mut Output,
) -> Result<Vec<Panel>, CliError> {
    let ivp = IvpOptions::with_tol(t.ivp_tol);
    let mut panels = Vec::new();
    for &m in &t.modes {
        let mode = CoordinateMode::from(m);
        let grid = scan(sys, &t.grid, mode, t.sign, &ivp)?;
        panels.push(write_panel(
            &grid,
            &t.levels,
            &t.cuts,
            &format!("_{}", mode.name()),
            out,
        )?);
    }
    Ok(panels)
}

/// Uniform schedule with the extra points merged in.
fn schedule(from: f64, to: f64, step: f64, extra: &[f64]) -> Vec<f64> {
    let mut s = uniform_grid(from, to, step);
    s.extend(extra.iter().copied().filter(|x| (from..=to).contains(x)));
    s.sort_by(f64::total_cmp);
    // keep the requested value when a grid point coincides with it
    let mut out: Vec<f64> = Vec::with_capacity(s.len());
    for x in s {
        match out.last_mut() {
            Some(last) if (x - *last).abs() < 1e-9 => {
                if extra.contains(&x) {
                    *last = x;
                }
            }
            _ => out.push(x),
        }
    }
    out
}

fn start_saddle(
    sys: &PhysicalSystem,
    start: &StartSpec,
    x1: f64,
    newton: &NewtonOptions,
) -> Result<Saddle, CliError> {
    match *start {
        StartSpec::RealIndex(k) => {
            let mut real = find_all_real_saddles(sys, x1, &RealScan::default_for(sys, x1), newton)?;
            real.sort_by(|a, b| a.ctrl.value().re.total_cmp(&b.ctrl.value().re));
            let n = real.len();
            real.into_iter().nth(k).ok_or_else(|| {
                CliError::Config(format!(
                    "task.track.start: real_index {k} but only {n} real saddles at x1 = {x1}"
                ))
            })
        }
        StartSpec::Guess(g) => {
            let ctrl = ControlParameter::for_system(sys, g.into());
            Ok(newton_solve(
                sys,
                ctrl,
                x1,
                CoordinateMode::Plain,
                1,
                newton,
            )?)
        }
    }
}

fn cmd_track(
    sys: &PhysicalSystem,
    t: &TrackTask,
    out: &mut Output,
) -> Result<Vec<Panel>, CliError> {
    let opts = TrackOptions {
        preference: t.preference.into(),
        stop_at_fold: t.stop_at_fold,
        ..TrackOptions::default()
    };
    let sched = schedule(t.from, t.to, t.step, &t.dumps);
    let start = start_saddle(sys, &t.start, sched[0], &opts.newton)?;
    let rec = track_partial(sys, &start, &sched, &opts)?;
    let mut prev = f64::NEG_INFINITY;
    let rows: Vec<TrackRow> = rec
        .states
        .iter()
        .map(|s| {
            let events = rec
                .events
                .iter()
                .filter(|e| e.x1 > prev && e.x1 <= s.x1)
                .map(|e| e.kind)
                .collect();
            prev = s.x1;
            TrackRow {
                x1: s.x1,
                ctrl: s.ctrl.value(),
                action: s.action,
                crossings: s.branch.crossing_count,
                relevant: s.relevant,
                events,
            }
        })
        .collect();
    let track_file = out.name("_track");
    io::write_track(out.create(&track_file)?, &rows)?;
    let events_file = out.name("_events");
    io::write_events(out.create(&events_file)?, &rec.events)?;

    let mut index = Vec::new();
    let mut series = Vec::new();
    for (k, &x1) in t.dumps.iter().enumerate() {
        let Some(s) = rec.state_at(x1) else { continue };
        let path = integrate_ivp(sys, s.ctrl, s.sign, &opts.newton.ivp)?;
        let f = out.name(&format!("_path{k}"));
        io::write_path(out.create(&f)?, &path.resample(t.dump_samples))?;
        index.push(vec![
            k.to_string(),
            fmt_f64(x1),
            s.kind.name().to_string(),
            s.relevant.to_string(),
        ]);
        series.push(Series::new(
            f,
            "re_x",
            "im_x",
            format!("x1 = {x1}"),
            "lines",
        ));
    }
    io::write_table(
        out.create(&out.name("_paths"))?,
        &["id", "x1", "kind", "relevant"],
        &index,
    )?;
    let ctrl = Panel {
        title: "control along the track".into(),
        xlabel: "x1",
        ylabel: "ctrl",
        series: vec![
            Series::new(track_file.clone(), "x1", "re_ctrl", "Re ctrl", "lines"),
            Series::new(track_file, "x1", "im_ctrl", "Im ctrl", "lines"),
        ],
    };
    if let (Some(reason), false) = (&rec.stopped, t.stop_at_fold) {
        // the tables above hold everything up to the stall
        let x1 = rec.states.last().map_or(t.from, |s| s.x1);
        return Err(Error::TrackStalled {
            x1,
            reason: reason.clone(),
        }
        .into());
    }
    Ok(vec![
        ctrl,
        Panel {
            title: "paths".into(),
            xlabel: "Re x",
            ylabel: "Im x",
            series,
        },
    ])
}

fn cmd_compare(
    sys: &PhysicalSystem,
    t: &CompareTask,
    out: &mut Output,
) -> Result<Vec<Panel>, CliError> {
    let grid = uniform_grid(t.from, t.to, t.step);
    let hbars = if t.hbar.is_empty() {
        vec![sys.hbar]
    } else {
        t.hbar.clone()
    };
    let mut panels = Vec::new();
    let mut summary = Vec::new();
    for (k, &h) in hbars.iter().enumerate() {
        let sys = sys.with_hbar(h);
        sys.validate()
            .map_err(|e| CliError::Config(format!("task.compare.hbar: {e}")))?;
        let tag = if hbars.len() == 1 {
            String::new()
        } else {
            format!("_h{k}")
        };
        let exact: Vec<(f64, Complex64)> = grid
            .par_iter()
            .map(|&x| exact_energy_propagator(&sys, x).map(|v| (x, v)))
            .collect::<Result<_, _>>()?;
        let exact_file = out.name(&format!("{tag}_exact"));
        io::write_exact(out.create(&exact_file)?, &exact)?;
        let mut series = vec![Series::new(
            exact_file.clone(),
            "x1",
            "abs_K",
            "exact",
            "lines lw 2",
        )];
        if !t.exact_only {
            let curve = comparison_curve(&sys, &grid, &CompareOptions::default())?;
            let rows: Vec<CompareRow> = curve
                .samples
                .iter()
                .map(|s| CompareRow {
                    x1: s.x1,
                    abs_exact: s.exact.norm(),
                    abs_real_only: s.real_only.map(|v| v.norm()),
                    abs_bvp_complex: s.bvp_complex.map(|v| v.norm()),
                    abs_continued: s.continued.map(|v| v.norm()),
                    events: s.events.clone(),
                })
                .collect();
            let f = out.name(&format!("{tag}_compare"));
            io::write_compare(out.create(&f)?, &rows)?;
            series = vec![
                Series::new(f.clone(), "x1", "abs_exact", "exact", "lines lw 2"),
                Series::new(
                    f.clone(),
                    "x1",
                    "abs_real_only",
                    "real saddles",
                    "lines dt 3",
                ),
                Series::new(
                    f.clone(),
                    "x1",
                    "abs_bvp_complex",
                    "complex saddles",
                    "lines dt 2",
                ),
                Series::new(f, "x1", "abs_continued", "continued saddles", "lines"),
            ];
            for w in &t.windows {
                for (name, mode) in [
                    ("real_only", ApproxMode::RealOnly),
                    ("bvp_complex", ApproxMode::BvpComplex),
                    ("continued", ApproxMode::Continued),
                ] {
                    let err = curve.sup_relative_error(mode, w[0], w[1]);
                    summary.push(vec![
                        fmt_f64(h),
                        fmt_f64(w[0]),
                        fmt_f64(w[1]),
                        name.to_string(),
                        fmt_f64(err),
                    ]);
                }
            }
        }
        panels.push(Panel {
            title: format!("hbar = {h}"),
            xlabel: "x1",
            ylabel: "|K|",
            series,
        });
    }
    if !t.exact_only {
        io::write_table(
            out.create(&out.name("_errors"))?,
            &["hbar", "lo", "hi", "mode", "sup_rel_error"],
            &summary,
        )?;
    }
    Ok(panels)
}

fn cmd_discrete(
    sys: &PhysicalSystem,
    t: &DiscreteTask,
    out: &mut Output,
) -> Result<Vec<Panel>, CliError> {
    let mut panels = Vec::new();
    let mut summary = Vec::new();
    if t.continuum {
        let grid = scan(
            sys,
            &t.grid,
            CoordinateMode::Plain,
            1,
            &IvpOptions::default(),
        )?;
        panels.push(write_panel(&grid, &t.levels, &t.cuts, "_continuum", out)?);
        summary.push(vec![
            "continuum".into(),
            detect_branch_cuts(&grid, &t.cuts).len().to_string(),
            divergence_sites(&grid, t.site_ratio).to_string(),
        ]);
    }
    for &n in &t.steps {
        let grid = discrete_landscape(sys, n, &t.grid)?;
        panels.push(write_panel(
            &grid,
            &t.levels,
            &t.cuts,
            &format!("_n{n}"),
            out,
        )?);
        summary.push(vec![
            format!("n{n}"),
            detect_branch_cuts(&grid, &t.cuts).len().to_string(),
            divergence_sites(&grid, t.site_ratio).to_string(),
        ]);
    }
    io::write_table(
        out.create(&out.name("_summary"))?,
        &["panel", "cut_chains", "divergence_sites"],
        &summary,
    )?;
    if let Some(c) = &t.chain {
        panels.push(write_chains(sys, c, out)?);
    }
    Ok(panels)
}

fn write_chains(sys: &PhysicalSystem, c: &ChainTask, out: &mut Output) -> Result<Panel, CliError> {
    let sched = schedule(c.from, c.to, c.step, &c.dumps);
    let first = discrete_newton(
        sys,
        c.n,
        Complex64::new(sched[0], 0.0),
        c.guess.into(),
        1e-12,
        60,
    )?;
    let chains = discrete_track(sys, c.n, first.vbar0, &sched)?;
    let rows: Vec<Vec<String>> = chains
        .iter()
        .zip(&sched)
        .map(|(ch, x1)| {
            vec![
                fmt_f64(*x1),
                fmt_f64(ch.vbar0.re),
                fmt_f64(ch.vbar0.im),
                fmt_f64(ch.jump_metric()),
            ]
        })
        .collect();
    io::write_table(
        out.create(&out.name("_jumps"))?,
        &["x1", "re_vbar0", "im_vbar0", "jump_metric"],
        &rows,
    )?;
    let mut series = Vec::new();
    for (k, &x1) in c.dumps.iter().enumerate() {
        let Some(i) = sched.iter().position(|&s| s == x1) else {
            continue;
        };
        let f = out.name(&format!("_chain{k}"));
        io::write_chain(out.create(&f)?, &chains[i].points)?;
        series.push(Series::new(
            f,
            "re_y",
            "im_y",
            format!("x1 = {x1}"),
            "linespoints",
        ));
    }
    Ok(Panel {
        title: format!("discrete chains, n = {}", c.n),
        xlabel: "Re y",
        ylabel: "Im y",
        series,
    })
}

fn cmd_saddles(
    sys: &PhysicalSystem,
    t: &SaddlesTask,
    out: &mut Output,
) -> Result<Vec<Panel>, CliError> {
    let newton = NewtonOptions::default();
    let mut rows: Vec<SaddleRow> = Vec::new();
    for &x1 in &t.x1 {
        let mut found = find_all_real_saddles(sys, x1, &RealScan::default_for(sys, x1), &newton)?;
        for g in &t.guesses {
            let ctrl = ControlParameter::for_system(sys, (*g).into());
            // seeds that fail to converge are skipped
            if let Ok(s) = newton_solve(sys, ctrl, x1, CoordinateMode::Plain, 1, &newton) {
                if found.iter().all(|f| {
                    (f.ctrl.value() - s.ctrl.value()).norm() > 1e-8 * (1.0 + s.ctrl.value().norm())
                }) {
                    found.push(s);
                }
            }
        }
        found.sort_by(|a, b| {
            let (p, q) = (a.ctrl.value(), b.ctrl.value());
            p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im))
        });
        rows.extend(found.iter().map(SaddleRow::from));
    }
    let f = out.name("_saddles");
    io::write_saddles(out.create(&f)?, &rows)?;
    Ok(vec![Panel {
        title: "saddles".into(),
        xlabel: "Re ctrl",
        ylabel: "Im ctrl",
        series: vec![Series::new(
            f,
            "re_ctrl",
            "im_ctrl",
            "saddles",
            "points pt 7",
        )],
    }])
}
