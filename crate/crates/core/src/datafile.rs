//! Tab-separated files for datasets and simulation truth.
//!
//! ```text
//! # passnet-covariates v1
//! # players	8
//! game	interval	sender	receiver	w1	w2	w3	w4	w5	xi_sender	xi_receiver	dt
//! 0	0	3	1	1	0	1.73	2	-0.41	0.00042	0.00039	0.2
//!
//! # passnet-events v1
//! game	possession	interval	sender	receiver
//! 0	0	0	3	1
//!
//! # passnet-truth v1
//! # players	8
//! # rank	2
//! # games	0,1
//! parameter	value
//! beta/0/1/0	-0.27
//! U/0/0/0	1.2
//!
//! # passnet-passes v1
//! sender	receiver	receiver_position	sender_x	sender_y	receiver_x	receiver_y
//! 601140	201939	F	23.5	31	12	40.25
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a file and
//! writing it back reproduces it byte for byte.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{
    CovariateRecord, Dataset, GameId, LatentFactorSet, PassEvent, PlayerId, PositionClass, PossessionId, N_COVARIATES,
};
use crate::spatial::{CourtLocation, LocatedPass};
use crate::synthetic::SyntheticTruth;

const COVARIATES_MAGIC: &str = "# passnet-covariates v1";
const COVARIATES_COLUMNS: &str = "game\tinterval\tsender\treceiver\tw1\tw2\tw3\tw4\tw5\txi_sender\txi_receiver\tdt";
const EVENTS_MAGIC: &str = "# passnet-events v1";
const EVENTS_COLUMNS: &str = "game\tpossession\tinterval\tsender\treceiver";
const TRUTH_MAGIC: &str = "# passnet-truth v1";
const TRUTH_COLUMNS: &str = "parameter\tvalue";
const PASSES_MAGIC: &str = "# passnet-passes v1";
const PASSES_COLUMNS: &str = "sender\treceiver\treceiver_position\tsender_x\tsender_y\treceiver_x\treceiver_y";

type Lines<'a> = Box<dyn Iterator<Item = (usize, &'a str)> + 'a>;

fn lines(text: &str) -> Lines<'_> {
    Box::new(text.lines().enumerate().map(|(i, l)| (i + 1, l)))
}

fn expect_line(lines: &mut Lines<'_>, want: &str, what: &str) -> Result<()> {
    match lines.next() {
        Some((_, l)) if l == want => Ok(()),
        Some((no, l)) => Err(Error::Schema(format!("line {no}: expected {what} `{want}`, found `{l}`"))),
        None => Err(Error::Schema(format!("file ends before {what} `{want}`"))),
    }
}

fn header<'a>(lines: &mut Lines<'a>, key: &str) -> Result<(usize, &'a str)> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("file ends before header `{key}`")))?;
    line.strip_prefix(&format!("# {key}\t"))
        .map(|v| (no, v))
        .ok_or_else(|| Error::parse(no, format!("expected header `# {key}`")))
}

fn field<T: std::str::FromStr>(no: usize, s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::parse(no, format!("bad {what} `{s}`")))
}

pub fn covariates_to_text(n_players: usize, covariates: &[CovariateRecord<f64>]) -> String {
    let mut out = format!("{COVARIATES_MAGIC}\n# players\t{n_players}\n{COVARIATES_COLUMNS}\n");
    for c in covariates {
        let _ = write!(out, "{}\t{}\t{}\t{}", c.game, c.interval_index, c.sender, c.receiver);
        for w in c.w {
            let _ = write!(out, "\t{w}");
        }
        let _ = writeln!(out, "\t{}\t{}\t{}", c.xi_at_sender, c.xi_at_receiver, c.interval_length);
    }
    out
}

/// Player count and records. Each record is validated on its own; the
/// cross-record checks happen when a [`Dataset`] is assembled.
pub fn parse_covariates(text: &str) -> Result<(usize, Vec<CovariateRecord<f64>>)> {
    let mut lines = lines(text);
    expect_line(&mut lines, COVARIATES_MAGIC, "schema line")?;
    let (no, n) = header(&mut lines, "players")?;
    let n_players: usize = field(no, n, "player count")?;
    expect_line(&mut lines, COVARIATES_COLUMNS, "column header")?;
    let mut out = Vec::new();
    for (no, line) in lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 12 {
            return Err(Error::parse(no, format!("{} columns; expected 12", f.len())));
        }
        let mut w = [0.0; 5];
        for (k, slot) in w.iter_mut().enumerate() {
            *slot = field(no, f[4 + k], "covariate")?;
        }
        let c = CovariateRecord {
            game: GameId(field(no, f[0], "game")?),
            interval_index: field(no, f[1], "interval")?,
            sender: PlayerId(field(no, f[2], "sender")?),
            receiver: PlayerId(field(no, f[3], "receiver")?),
            w,
            xi_at_sender: field(no, f[9], "xi_sender")?,
            xi_at_receiver: field(no, f[10], "xi_receiver")?,
            interval_length: field(no, f[11], "dt")?,
        };
        c.validate().map_err(|e| Error::parse(no, e.to_string()))?;
        out.push(c);
    }
    Ok((n_players, out))
}

pub fn events_to_text(events: &[PassEvent]) -> String {
    let mut out = format!("{EVENTS_MAGIC}\n{EVENTS_COLUMNS}\n");
    for e in events {
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", e.game, e.possession, e.interval_index, e.sender, e.receiver);
    }
    out
}

pub fn parse_events(text: &str) -> Result<Vec<PassEvent>> {
    let mut lines = lines(text);
    expect_line(&mut lines, EVENTS_MAGIC, "schema line")?;
    expect_line(&mut lines, EVENTS_COLUMNS, "column header")?;
    lines
        .map(|(no, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(Error::parse(no, format!("{} columns; expected 5", f.len())));
            }
            Ok(PassEvent {
                game: GameId(field(no, f[0], "game")?),
                possession: PossessionId(field(no, f[1], "possession")?),
                interval_index: field(no, f[2], "interval")?,
                sender: PlayerId(field(no, f[3], "sender")?),
                receiver: PlayerId(field(no, f[4], "receiver")?),
            })
        })
        .collect()
}

/// Assembles and validates a dataset from its two files.
pub fn read_dataset(covariates: &str, events: &str) -> Result<Dataset<f64>> {
    let (n_players, covariates) = parse_covariates(covariates)?;
    Dataset::new(n_players, covariates, parse_events(events)?)
}

/// Truth in the samples' parameter-path form: `beta/<i>/<j>/<k>` for every
/// ordered pair of distinct players, then `U/<g>/<i>/<r>` and `V/<g>/<j>/<r>`.
pub fn truth_to_text(truth: &SyntheticTruth) -> String {
    let n = (truth.beta.len() as f64).sqrt().round() as usize;
    let games: Vec<String> = truth.factors.iter().map(|f| f.game.to_string()).collect();
    let mut out = format!(
        "{TRUTH_MAGIC}\n# players\t{n}\n# rank\t{}\n# games\t{}\n{TRUTH_COLUMNS}\n",
        truth.rank(),
        games.join(",")
    );
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            for (k, v) in truth.beta[i * n + j].iter().enumerate() {
                let _ = writeln!(out, "beta/{i}/{j}/{k}\t{v}");
            }
        }
    }
    for f in &truth.factors {
        for (name, m) in [("U", &f.u), ("V", &f.v)] {
            for i in 0..m.nrows() {
                for r in 0..m.ncols() {
                    let _ = writeln!(out, "{name}/{}/{i}/{r}\t{}", f.game, m[(i, r)]);
                }
            }
        }
    }
    out
}

pub fn parse_truth(text: &str) -> Result<SyntheticTruth> {
    let mut lines = lines(text);
    expect_line(&mut lines, TRUTH_MAGIC, "schema line")?;
    let (no, n) = header(&mut lines, "players")?;
    let n: usize = field(no, n, "player count")?;
    let (no, rank) = header(&mut lines, "rank")?;
    let rank: usize = field(no, rank, "rank")?;
    let (no, games) = header(&mut lines, "games")?;
    let games: Vec<GameId> = if games.is_empty() {
        Vec::new()
    } else {
        games.split(',').map(|g| field(no, g, "game").map(GameId)).collect::<Result<_>>()?
    };
    expect_line(&mut lines, TRUTH_COLUMNS, "column header")?;

    let mut beta = vec![[0.0; N_COVARIATES]; n * n];
    let mut seen_beta = vec![[false; N_COVARIATES]; n * n];
    let mut mats: Vec<[DMatrix<f64>; 2]> = games.iter().map(|_| [DMatrix::zeros(n, rank), DMatrix::zeros(n, rank)]).collect();
    let mut seen_factor = 0usize;
    for (no, line) in lines {
        let (path, value) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(no, "expected two columns"))?;
        let value: f64 = field(no, value, "value")?;
        let parts: Vec<&str> = path.split('/').collect();
        let bad = || Error::parse(no, format!("bad parameter path `{path}`"));
        let [head, a, b, c] = parts.as_slice() else {
            return Err(bad());
        };
        let (a, b, c): (usize, usize, usize) = (field(no, a, "index")?, field(no, b, "index")?, field(no, c, "index")?);
        match *head {
            "beta" if a < n && b < n && a != b && c < N_COVARIATES => {
                beta[a * n + b][c] = value;
                seen_beta[a * n + b][c] = true;
            }
            "U" | "V" if b < n && c < rank => {
                let gi = games.binary_search(&GameId(a as u32)).map_err(|_| bad())?;
                mats[gi][usize::from(*head == "V")][(b, c)] = value;
                seen_factor += 1;
            }
            _ => return Err(bad()),
        }
    }
    let missing_beta = (0..n * n).filter(|s| s / n != s % n).any(|s| seen_beta[s].iter().any(|x| !x));
    if missing_beta || seen_factor != games.len() * 2 * n * rank {
        return Err(Error::Consistency("truth file does not list every parameter exactly once".into()));
    }
    let factors = games
        .iter()
        .zip(mats)
        .map(|(&g, [u, v])| LatentFactorSet::new(g, u, v))
        .collect::<Result<_>>()?;
    Ok(SyntheticTruth { beta, factors })
}

pub fn passes_to_text(passes: &[LocatedPass]) -> String {
    let mut out = format!("{PASSES_MAGIC}\n{PASSES_COLUMNS}\n");
    for p in passes {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.sender,
            p.receiver,
            p.receiver_position,
            p.sender_location.x,
            p.sender_location.y,
            p.receiver_location.x,
            p.receiver_location.y
        );
    }
    out
}

pub fn parse_passes(text: &str) -> Result<Vec<LocatedPass>> {
    let mut lines = lines(text);
    expect_line(&mut lines, PASSES_MAGIC, "schema line")?;
    expect_line(&mut lines, PASSES_COLUMNS, "column header")?;
    lines
        .map(|(no, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 7 {
                return Err(Error::parse(no, format!("{} columns; expected 7", f.len())));
            }
            Ok(LocatedPass {
                sender: PlayerId(field(no, f[0], "sender")?),
                receiver: PlayerId(field(no, f[1], "receiver")?),
                receiver_position: PositionClass::from_code(f[2])
                    .ok_or_else(|| Error::parse(no, format!("bad position `{}`", f[2])))?,
                sender_location: CourtLocation::new(field(no, f[3], "x")?, field(no, f[4], "y")?),
                receiver_location: CourtLocation::new(field(no, f[5], "x")?, field(no, f[6], "y")?),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, SyntheticSpec};

    fn small() -> crate::synthetic::SyntheticData {
        generate(&SyntheticSpec {
            n_players: 6,
            target_observations: 300,
            seed: 11,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn dataset_round_trips_byte_for_byte() {
        let s = small();
        let cov = covariates_to_text(s.dataset.n_players, &s.dataset.covariates);
        let ev = events_to_text(&s.dataset.events);
        let back = read_dataset(&cov, &ev).unwrap();
        assert_eq!(back, s.dataset);
        assert_eq!(covariates_to_text(back.n_players, &back.covariates), cov);
        assert_eq!(events_to_text(&back.events), ev);
    }

    #[test]
    fn truth_round_trips() {
        let s = small();
        let text = truth_to_text(&s.truth);
        let back = parse_truth(&text).unwrap();
        assert_eq!(back, s.truth);
        assert_eq!(truth_to_text(&back), text);
        // 6·5 dyads × 7 + 2 games × 2 sides × 6 × 2.
        assert_eq!(text.lines().count(), 5 + 210 + 48);
    }

    #[test]
    fn truncated_truth_is_rejected() {
        let text = truth_to_text(&small().truth);
        let cut: String = text.lines().take(50).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_truth(&cut), Err(Error::Consistency(_))));
    }

    #[test]
    fn bad_rows_name_their_line() {
        let text = format!("{COVARIATES_MAGIC}\n# players\t5\n{COVARIATES_COLUMNS}\n0\t0\t1\t2\t1\t0\t1\t7\t0\t0\t0\t0.2\n");
        match parse_covariates(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_events("# passnet-events v2\n"), Err(Error::Schema(_))));
    }

    #[test]
    fn passes_round_trip() {
        let passes = vec![LocatedPass {
            sender: PlayerId(601140),
            receiver: PlayerId(201939),
            receiver_position: PositionClass::Forward,
            sender_location: CourtLocation::new(23.5, 31.0),
            receiver_location: CourtLocation::new(12.0, 40.25),
        }];
        let text = passes_to_text(&passes);
        assert_eq!(text.lines().nth(2), Some("601140\t201939\tF\t23.5\t31\t12\t40.25"));
        assert_eq!(parse_passes(&text).unwrap(), passes);
    }
}
