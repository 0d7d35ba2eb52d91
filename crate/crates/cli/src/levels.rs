//! Parser for `--levels "E=1:theta=0.3,E=2:t=0.5:cut=40"`.

use stark_embed::potential::EnergyLevel;

pub fn parse_levels(s: &str) -> Result<Vec<EnergyLevel>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|item| !item.is_empty())
        .map(parse_level)
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| if v.is_empty() { Err("no levels given".into()) } else { Ok(v) })
}

fn parse_level(item: &str) -> Result<EnergyLevel, String> {
    let mut energy = None;
    let mut level = EnergyLevel::new(0.0);
    for field in item.split(':') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("expected key=value in level '{item}', got '{field}'"))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| format!("not a number in level '{item}': '{value}'"))?;
        if !v.is_finite() {
            return Err(format!("non-finite value in level '{item}'"));
        }
        match key.trim() {
            "E" => energy = Some(v),
            "theta" => level.theta_bc = Some(v),
            "t" => level.t = v,
            "cut" | "a_cut" => level.a_cut = Some(v),
            other => return Err(format!("unknown key '{other}' in level '{item}' (use E, theta, t, cut)")),
        }
    }
    level.energy = energy.ok_or_else(|| format!("level '{item}' has no E"))?;
    Ok(level)
}
