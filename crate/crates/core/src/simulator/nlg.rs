//! Template realization.
//!
//! A template line reads `<speaker> <ACT:ACTIVITY> [flags] | <pattern>`.
//! Flags: `!nomatch` (only for frames reporting an empty result) and
//! `req=a,b` (request slots must be exactly `{a, b}`).
//!
//! Placeholders: `{obj}` one object, `{objs}` one or more joined with "and",
//! `{objs_or}` two or more joined with "or", `{amb}` the underspecified
//! reference of an ambiguous frame, `{req}` the request slots, `{slot:NAME}` a
//! slot value, `{values}` every slot value not named by a `{slot:..}`.
//!
//! A template matches a frame when its placeholders account for exactly the
//! frame's objects, slot values and request slots, so every slot value of a
//! frame appears verbatim in its realization.

use std::collections::BTreeSet;

use rand::Rng;

use super::SimError;
use crate::catalog::{Catalog, CatalogItem};
use crate::ontology::{BeliefFrame, Intent, MentionKind, ObjectMention, Speaker};
use crate::scenegen::SceneSnapshot;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Piece {
    Text(String),
    Obj,
    Objs,
    ObjsOr,
    Amb,
    Req,
    Values,
    Slot(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    pub speaker: Speaker,
    pub intent: Intent,
    pub no_match: bool,
    pub req: Option<BTreeSet<String>>,
    pieces: Vec<Piece>,
    pub pattern: String,
}

impl Template {
    fn has(&self, p: &Piece) -> bool {
        self.pieces.contains(p)
    }

    fn slots(&self) -> BTreeSet<&str> {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn matches(&self, speaker: Speaker, frame: &BeliefFrame) -> bool {
        if self.speaker != speaker || self.intent != frame.intent() || self.no_match != frame.no_match {
            return false;
        }
        let (obj, objs, or) = (self.has(&Piece::Obj), self.has(&Piece::Objs), self.has(&Piece::ObjsOr));
        let n = frame.objects.len();
        if frame.is_ambiguous() {
            if !self.has(&Piece::Amb) || obj || objs || or {
                return false;
            }
        } else {
            if self.has(&Piece::Amb)
                || (obj && n != 1)
                || (objs && n == 0)
                || (or && n < 2)
                || (!(obj || objs || or) && n > 0)
            {
                return false;
            }
        }
        let named = self.slots();
        let keys: BTreeSet<&str> = frame.slot_values.keys().map(String::as_str).collect();
        if !named.is_subset(&keys) {
            return false;
        }
        let slots_ok = if self.has(&Piece::Values) {
            keys.len() > named.len()
        } else {
            keys == named
        };
        if !slots_ok {
            return false;
        }
        match &self.req {
            Some(r) => *r == frame.request_slots,
            None => self.has(&Piece::Req) != frame.request_slots.is_empty(),
        }
    }
}

fn parse_pattern(pattern: &str, line: usize) -> Result<Vec<Piece>, SimError> {
    let bad = |m: String| SimError::Template { line, message: m };
    let mut out = Vec::new();
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            out.push(Piece::Text(rest[..open].to_string()));
        }
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| bad("unclosed placeholder".into()))?
            + open;
        let name = &rest[open + 1..close];
        out.push(match name {
            "obj" => Piece::Obj,
            "objs" => Piece::Objs,
            "objs_or" => Piece::ObjsOr,
            "amb" => Piece::Amb,
            "req" => Piece::Req,
            "values" => Piece::Values,
            _ => match name.strip_prefix("slot:") {
                Some(s) if !s.is_empty() => Piece::Slot(s.to_string()),
                _ => return Err(bad(format!("unknown placeholder {{{name}}}"))),
            },
        });
        rest = &rest[close + 1..];
    }
    if rest.contains('}') {
        return Err(bad("stray '}'".into()));
    }
    if !rest.is_empty() {
        out.push(Piece::Text(rest.to_string()));
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TemplateSet {
    templates: Vec<Template>,
}

impl TemplateSet {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut templates = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let bad = |m: String| SimError::Template { line, message: m };
            let (head, pattern) = l
                .split_once('|')
                .ok_or_else(|| bad("expected '<speaker> <intent> | <pattern>'".into()))?;
            let mut words = head.split_whitespace();
            let speaker = match words.next() {
                Some("user") => Speaker::User,
                Some("assistant") => Speaker::Assistant,
                other => return Err(bad(format!("unknown speaker {other:?}"))),
            };
            let intent: Intent = words
                .next()
                .ok_or_else(|| bad("missing intent".into()))?
                .parse()
                .map_err(|e| bad(format!("{e}")))?;
            let mut no_match = false;
            let mut req = None;
            for flag in words {
                if flag == "!nomatch" {
                    no_match = true;
                } else if let Some(list) = flag.strip_prefix("req=") {
                    req = Some(list.split(',').map(str::to_string).collect());
                } else {
                    return Err(bad(format!("unknown flag {flag}")));
                }
            }
            let pattern = pattern.trim().to_string();
            let pieces = parse_pattern(&pattern, line)?;
            templates.push(Template {
                speaker,
                intent,
                no_match,
                req,
                pieces,
                pattern,
            });
        }
        Ok(Self { templates })
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn has(&self, speaker: Speaker, intent: Intent) -> bool {
        self.templates
            .iter()
            .any(|t| t.speaker == speaker && t.intent == intent)
    }

    pub fn matching(&self, speaker: Speaker, frame: &BeliefFrame) -> Vec<&Template> {
        self.templates.iter().filter(|t| t.matches(speaker, frame)).collect()
    }
}

/// Human-readable slot name for request phrases and `{values}`.
pub fn slot_display(slot: &str) -> &str {
    match slot {
        "size" => "available sizes",
        "customer_rating" => "customer rating",
        other => other,
    }
}

fn join(items: &[String], conj: &str) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} {conj} {last}", init.join(", ")),
    }
}

/// What the realizer needs besides the frame.
pub struct RenderContext<'a> {
    pub snapshot: &'a SceneSnapshot,
    pub catalog: &'a Catalog,
    /// Objects to render as references back into the dialog.
    pub anaphoric: &'a BTreeSet<u32>,
}

impl RenderContext<'_> {
    fn item(&self, local: u32) -> Result<&CatalogItem, SimError> {
        let ann = self.snapshot.object(local).ok_or_else(|| SimError::UnknownObject {
            snapshot_id: self.snapshot.snapshot_id.clone(),
            object: local,
        })?;
        self.catalog
            .get(&ann.item_id)
            .ok_or_else(|| SimError::UnknownItem(ann.item_id.clone()))
    }

    /// Spatial qualifier from the projected boxes: extreme position among
    /// objects of the same type first, then the object's image third, then
    /// its depth rank.
    pub fn qualifier(&self, local: u32) -> Result<&'static str, SimError> {
        let snap = self.snapshot;
        let me = &snap.objects[local as usize];
        let cat = &self.item(local)?.category;
        let mut peers = Vec::new();
        for o in &snap.objects {
            if &self.item(o.local_index)?.category == cat {
                peers.push(o);
            }
        }
        let (cx, _) = me.center();
        if peers.len() > 1 {
            let xs = peers.iter().map(|o| o.center().0);
            let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            if cx <= lo {
                return Ok("on the left");
            }
            if cx >= hi {
                return Ok("on the right");
            }
            if peers.iter().all(|o| o.local_index >= local) {
                return Ok("in front");
            }
            if peers.iter().all(|o| o.local_index <= local) {
                return Ok("in the back");
            }
        }
        let w = f64::from(snap.camera.image_size[0]);
        let n = snap.objects.len() as u32;
        Ok(if cx < w / 3.0 {
            "on the left"
        } else if cx > 2.0 * w / 3.0 {
            "on the right"
        } else if 3 * local < n {
            "in front"
        } else if 3 * local >= 2 * n {
            "in the back"
        } else {
            "in the middle"
        })
    }

    pub fn visual(&self, local: u32) -> Result<String, SimError> {
        let it = self.item(local)?;
        Ok(format!("the {} {} {}", it.color, it.category, self.qualifier(local)?))
    }

    fn anaphor(&self, local: u32) -> Result<String, SimError> {
        Ok(format!("that {}", self.item(local)?.category))
    }

    /// Vague reference shared by every candidate.
    pub fn ambiguous(&self, candidates: &[u32]) -> Result<String, SimError> {
        let items = candidates
            .iter()
            .map(|&c| self.item(c))
            .collect::<Result<Vec<_>, _>>()?;
        let first = items[0];
        Ok(if items.iter().all(|i| i.category == first.category) {
            format!("the {}", first.category)
        } else if items.iter().all(|i| i.color == first.color) {
            format!("the {} one", first.color)
        } else {
            "that one".to_string()
        })
    }

    fn objects(&self, objs: &[u32], conj: &str, out: &mut Vec<ObjectMention>) -> Result<String, SimError> {
        if objs.len() > 1 && objs.iter().all(|o| self.anaphoric.contains(o)) {
            let text = if objs.len() == 2 { "those two" } else { "those" }.to_string();
            out.push(ObjectMention {
                objects: objs.to_vec(),
                text: text.clone(),
                kind: MentionKind::Anaphoric,
            });
            return Ok(text);
        }
        let mut parts = Vec::new();
        for &o in objs {
            let (text, kind) = if self.anaphoric.contains(&o) {
                (self.anaphor(o)?, MentionKind::Anaphoric)
            } else {
                (self.visual(o)?, MentionKind::Visual)
            };
            out.push(ObjectMention {
                objects: vec![o],
                text: text.clone(),
                kind,
            });
            parts.push(text);
        }
        Ok(join(&parts, conj))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Realized {
    pub text: String,
    pub mentions: Vec<ObjectMention>,
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn render(t: &Template, frame: &BeliefFrame, ctx: &RenderContext<'_>) -> Result<Realized, SimError> {
    let mut text = String::new();
    let mut mentions = Vec::new();
    let named = t.slots();
    for p in &t.pieces {
        match p {
            Piece::Text(s) => text.push_str(s),
            Piece::Obj | Piece::Objs => text.push_str(&ctx.objects(&frame.objects, "and", &mut mentions)?),
            Piece::ObjsOr => text.push_str(&ctx.objects(&frame.objects, "or", &mut mentions)?),
            Piece::Amb => {
                let s = ctx.ambiguous(&frame.objects)?;
                mentions.push(ObjectMention {
                    objects: frame.objects.clone(),
                    text: s.clone(),
                    kind: MentionKind::Ambiguous,
                });
                text.push_str(&s);
            }
            Piece::Req => {
                let names: Vec<String> = frame
                    .request_slots
                    .iter()
                    .map(|s| slot_display(s).to_string())
                    .collect();
                text.push_str(&join(&names, "and"));
            }
            Piece::Slot(s) => text.push_str(&frame.slot_values[s]),
            Piece::Values => {
                let parts: Vec<String> = frame
                    .slot_values
                    .iter()
                    .filter(|(k, _)| !named.contains(k.as_str()))
                    .map(|(k, v)| format!("the {} is {v}", slot_display(k)))
                    .collect();
                text.push_str(&join(&parts, "and"));
            }
        }
    }
    Ok(Realized {
        text: capitalize(&text),
        mentions,
    })
}

/// Renders a frame with a template drawn uniformly among those that match.
pub fn realize<R: Rng + ?Sized>(
    frame: &BeliefFrame,
    speaker: Speaker,
    ctx: &RenderContext<'_>,
    templates: &TemplateSet,
    rng: &mut R,
) -> Result<Realized, SimError> {
    let matches = templates.matching(speaker, frame);
    if matches.is_empty() {
        return Err(SimError::MissingTemplate {
            speaker,
            intent: frame.intent(),
            shape: frame_shape(frame),
        });
    }
    let t = matches[rng.random_range(0..matches.len())];
    render(t, frame, ctx)
}

fn frame_shape(f: &BeliefFrame) -> String {
    let slots: Vec<&str> = f.slot_values.keys().map(String::as_str).collect();
    let req: Vec<&str> = f.request_slots.iter().map(String::as_str).collect();
    let mut parts = vec![format!("{} objects", f.objects.len())];
    if !slots.is_empty() {
        parts.push(format!("slots {}", slots.join(",")));
    }
    if !req.is_empty() {
        parts.push(format!("requests {}", req.join(",")));
    }
    if f.is_ambiguous() {
        parts.push("ambiguous".into());
    }
    if f.no_match {
        parts.push("no match".into());
    }
    parts.join("; ")
}

/// Words that carry no descriptor content in a rendered object reference.
pub const STOPWORDS: &[&str] = &[
    "the", "a", "an", "that", "those", "this", "these", "it", "one", "two", "on", "in", "of", "and", "or",
];

/// Content tokens of a rendered description, e.g. `["red", "jacket", "left"]`.
pub fn descriptor_tokens(description: &str) -> Vec<String> {
    crate::text::tokenize(&crate::text::normalize(description))
        .into_iter()
        .filter(|t| t.chars().any(char::is_alphanumeric) && !STOPWORDS.contains(&t.as_str()))
        .collect()
}
