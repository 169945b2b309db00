use std::fmt::Write;

use super::{Protocol, Schedule};
use crate::error::{Error, Result};

const COLUMNS: &str = "t_ms,B_rad_per_ms";

pub fn write_schedule_csv(schedule: &Schedule, model_hash: &str) -> String {
    write_schedule_csv_tagged(schedule, model_hash, None)
}

/// Like [`write_schedule_csv`], also recording the manifest that produced it.
pub fn write_schedule_csv_tagged(schedule: &Schedule, model_hash: &str, manifest_hash: Option<&str>) -> String {
    let mut out = String::new();
    write!(
        out,
        "# protocol={} t_f_ms={} c={} model_hash={}",
        schedule.protocol, schedule.t_f, schedule.c_value, model_hash
    )
    .unwrap();
    match manifest_hash {
        Some(h) => writeln!(out, " manifest_hash={h}").unwrap(),
        None => writeln!(out).unwrap(),
    }
    writeln!(out, "{COLUMNS}").unwrap();
    for (t, b) in schedule.samples() {
        writeln!(out, "{t},{b}").unwrap();
    }
    out
}

/// Parses a schedule file, returning the schedule and its model hash.
pub fn parse_schedule_csv(text: &str) -> Result<(Schedule, String)> {
    let err = |line: usize, msg: String| Error::ScheduleCsv { line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let header = header.strip_prefix('#').ok_or_else(|| err(1, "missing `#` header".into()))?;
    let (mut protocol, mut t_f, mut c, mut hash, mut manifest) = (None, None, None, None, None);
    for token in header.split_whitespace() {
        let (key, value) = token.split_once('=').ok_or_else(|| err(1, format!("bad token `{token}`")))?;
        let num = |v: &str| v.parse::<f64>().map_err(|_| err(1, format!("bad number `{v}` for {key}")));
        let slot_taken = match key {
            "protocol" => protocol.replace(value.parse::<Protocol>().map_err(|e| err(1, e.to_string()))?).is_some(),
            "t_f_ms" => t_f.replace(num(value)?).is_some(),
            "c" => c.replace(num(value)?).is_some(),
            "model_hash" => hash.replace(value.to_string()).is_some(),
            "manifest_hash" => manifest.replace(()).is_some(),
            _ => return Err(err(1, format!("unknown header key `{key}`"))),
        };
        if slot_taken {
            return Err(err(1, format!("duplicate header key `{key}`")));
        }
    }
    let missing = |k: &str| err(1, format!("header lacks `{k}`"));
    let protocol = protocol.ok_or_else(|| missing("protocol"))?;
    let t_f = t_f.ok_or_else(|| missing("t_f_ms"))?;
    let c = c.ok_or_else(|| missing("c"))?;
    let hash = hash.ok_or_else(|| missing("model_hash"))?;

    match lines.next() {
        Some((_, l)) if l.trim() == COLUMNS => {}
        Some((n, l)) => return Err(err(n, format!("expected column header `{COLUMNS}`, got `{l}`"))),
        None => return Err(err(2, "missing column header".into())),
    }

    let mut times = Vec::new();
    let mut fields = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (t, b) = line.split_once(',').ok_or_else(|| err(n, "expected two columns".into()))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| err(n, format!("bad number `{v}`")));
        times.push(parse(t)?);
        fields.push(parse(b)?);
    }
    let schedule = Schedule::new(times, fields, protocol, c)?;
    if (schedule.t_f - t_f).abs() > 1e-9 * t_f.abs() {
        return Err(err(1, format!("t_f_ms={t_f} disagrees with last sample {}", schedule.t_f)));
    }
    Ok((schedule, hash))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Schedule {
        Schedule::new(vec![0.0, 0.7, 1.9, 4.8], vec![43.98, 12.5, 0.3, 0.0], Protocol::Faquad(3), 0.0125)
            .unwrap()
    }

    #[test]
    fn round_trip() {
        let s = sample();
        let text = write_schedule_csv(&s, "abc123");
        assert!(text.starts_with("# protocol=FAQUAD-3 t_f_ms=4.8 c=0.0125 model_hash=abc123\n"));
        let (back, hash) = parse_schedule_csv(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(hash, "abc123");
        let tagged = write_schedule_csv_tagged(&s, "abc123", Some("ffee"));
        assert!(tagged.lines().next().unwrap().ends_with(" manifest_hash=ffee"));
        assert_eq!(parse_schedule_csv(&tagged).unwrap(), (s, "abc123".to_string()));
    }

    #[test]
    fn rejects_malformed() {
        let good = write_schedule_csv(&sample(), "h");
        for bad in [
            "",
            "t_ms,B_rad_per_ms\n0,1\n1,0\n",
            "# protocol=LA t_f_ms=1 c=1\nt_ms,B_rad_per_ms\n0,1\n1,0\n",
            "# protocol=LA t_f_ms=1 c=1 model_hash=x\nt,B\n0,1\n1,0\n",
            "# protocol=LA t_f_ms=1 c=1 model_hash=x\nt_ms,B_rad_per_ms\n0,1\n1,0.5\n",
            "# protocol=LA t_f_ms=2 c=1 model_hash=x\nt_ms,B_rad_per_ms\n0,1\n1,0\n",
            "# protocol=XX t_f_ms=1 c=1 model_hash=x\nt_ms,B_rad_per_ms\n0,1\n1,0\n",
            "# protocol=LA t_f_ms=1 c=1 model_hash=x\nt_ms,B_rad_per_ms\n0,1\n1;0\n",
        ] {
            assert!(parse_schedule_csv(bad).is_err(), "{bad:?}");
        }
        assert!(parse_schedule_csv(&good.replace("0.7,", "0.7x,")).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_monotone_schedules_round_trip(
            steps in prop::collection::vec((1e-3f64..2.0, 0.0f64..5.0), 1..40),
            c in 1e-6f64..1e3,
        ) {
            let mut times = vec![0.0];
            let mut fields = vec![steps.iter().map(|s| s.1).sum::<f64>() + 1.0];
            for (dt, db) in &steps {
                times.push(times.last().unwrap() + dt);
                fields.push((fields.last().unwrap() - db).max(0.0));
            }
            *fields.last_mut().unwrap() = 0.0;
            let s = Schedule::new(times, fields, Protocol::La, c).unwrap();
            let (back, _) = parse_schedule_csv(&write_schedule_csv(&s, "p")).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn parser_never_panics(text in ".{0,300}") {
            let _ = parse_schedule_csv(&text);
        }
    }
}
