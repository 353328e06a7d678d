//! Corpus files: UTF-8, one post per line, six tab-separated fields
//! `post_id author posted_at latitude longitude text`. Latitude and
//! longitude are both empty when the post has no geotag. The text is last and
//! holds no tab. Blank lines are ignored.

use super::{Coordinates, HarvestError, PublicPost};
use crate::model::clock::{format_timestamp, parse_timestamp};
use crate::model::GeoTag;

pub fn parse_corpus(src: &str) -> Result<Vec<PublicPost>, HarvestError> {
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_line(l.strip_suffix('\r').unwrap_or(l))
                .map_err(|message| HarvestError::Corpus { line: i + 1, message })
        })
        .collect()
}

fn parse_line(line: &str) -> Result<PublicPost, String> {
    let fields: Vec<&str> = line.splitn(6, '\t').collect();
    let [post_id, author, posted_at, lat, lon, text] = fields[..] else {
        return Err(format!("expected 6 tab-separated fields, found {}", fields.len()));
    };
    if text.contains('\t') {
        return Err("text field contains a tab".into());
    }
    if post_id.is_empty() {
        return Err("empty post_id".into());
    }
    let posted_at = parse_timestamp(posted_at).ok_or_else(|| format!("bad timestamp \"{posted_at}\""))?;
    let geotag = match (lat, lon) {
        ("", "") => None,
        (lat, lon) => {
            let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| format!("bad {what} \"{s}\""));
            let (latitude, longitude) = (num(lat, "latitude")?, num(lon, "longitude")?);
            GeoTag::device(latitude, longitude).map_err(|e| e.to_string())?;
            Some(Coordinates { latitude, longitude })
        }
    };
    Ok(PublicPost {
        post_id: post_id.to_owned(),
        author: author.to_owned(),
        posted_at,
        geotag,
        text: text.to_owned(),
    })
}

/// Inverse of [`parse_corpus`] for posts whose fields hold no tab or line
/// break.
pub fn write_corpus(posts: &[PublicPost]) -> String {
    let mut out = String::new();
    for p in posts {
        let (lat, lon) = p.geotag.map_or((String::new(), String::new()), |c| {
            (c.latitude.to_string(), c.longitude.to_string())
        });
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            p.post_id,
            p.author,
            format_timestamp(&p.posted_at),
            lat,
            lon,
            p.text
        ));
    }
    out
}
