//! Prompt strategies: rendering templates and parsing model replies.
//!
//! Templates live in `assets/prompts/` and use `{dish_name}`, `{csi_span}`,
//! `{recipe_name}` and `{recipe_instructions}` placeholders, plus
//! `{*_definition}` slots filled from the shared strategy definitions.
//! Every rendered prompt ends with an output-format trailer asking for a
//! `FINAL: <translation>` line, or for three numbered options and a
//! `BEST: <n>` line in the Equivalents variants.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Recipe;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Baseline,
    Recipe,
    RecipeEtt,
    Equivalents,
    Neutralisation,
    RecipeEquivalents,
    RecipeNeutralisation,
    Cultural,
    Descriptive,
    Functional,
    RecipeCultural,
    RecipeDescriptive,
    RecipeFunctional,
}

impl Strategy {
    pub const ALL: [Strategy; 13] = [
        Strategy::Baseline,
        Strategy::Recipe,
        Strategy::RecipeEtt,
        Strategy::Equivalents,
        Strategy::Neutralisation,
        Strategy::RecipeEquivalents,
        Strategy::RecipeNeutralisation,
        Strategy::Cultural,
        Strategy::Descriptive,
        Strategy::Functional,
        Strategy::RecipeCultural,
        Strategy::RecipeDescriptive,
        Strategy::RecipeFunctional,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::Recipe => "recipe",
            Strategy::RecipeEtt => "recipe_ett",
            Strategy::Equivalents => "equivalents",
            Strategy::Neutralisation => "neutralisation",
            Strategy::RecipeEquivalents => "recipe_equivalents",
            Strategy::RecipeNeutralisation => "recipe_neutralisation",
            Strategy::Cultural => "cultural",
            Strategy::Descriptive => "descriptive",
            Strategy::Functional => "functional",
            Strategy::RecipeCultural => "recipe_cultural",
            Strategy::RecipeDescriptive => "recipe_descriptive",
            Strategy::RecipeFunctional => "recipe_functional",
        }
    }

    /// Row label for score tables.
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Baseline => "Original",
            Strategy::Recipe => "Recipe",
            Strategy::RecipeEtt => "Recipe + EtT",
            Strategy::Equivalents => "Equivalents",
            Strategy::Neutralisation => "Neutralisation",
            Strategy::RecipeEquivalents => "Recipe + Equivalents",
            Strategy::RecipeNeutralisation => "Recipe + Neutralisation",
            Strategy::Cultural => "Cultural",
            Strategy::Descriptive => "Descriptive",
            Strategy::Functional => "Functional",
            Strategy::RecipeCultural => "Recipe + Cultural",
            Strategy::RecipeDescriptive => "Recipe + Descriptive",
            Strategy::RecipeFunctional => "Recipe + Functional",
        }
    }

    pub fn requires_recipe(self) -> bool {
        matches!(
            self,
            Strategy::Recipe
                | Strategy::RecipeEtt
                | Strategy::RecipeEquivalents
                | Strategy::RecipeNeutralisation
                | Strategy::RecipeCultural
                | Strategy::RecipeDescriptive
                | Strategy::RecipeFunctional
        )
    }

    /// Strategies whose reply lists three options and picks one.
    pub fn is_equivalents(self) -> bool {
        matches!(self, Strategy::Equivalents | Strategy::RecipeEquivalents)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase().replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == wanted)
            .ok_or_else(|| PromptError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("strategy {0} needs a retrieved recipe")]
    MissingRecipe(Strategy),
    #[error("strategy {0} does not take a recipe")]
    UnexpectedRecipe(Strategy),
    #[error("dish name is empty")]
    EmptyDish,
    #[error("empty response")]
    EmptyResponse,
}

const DEF_CULTURAL: &str = include_str!("../assets/prompts/def_cultural.txt");
const DEF_FUNCTIONAL: &str = include_str!("../assets/prompts/def_functional.txt");
const DEF_DESCRIPTIVE: &str = include_str!("../assets/prompts/def_descriptive.txt");
const DEF_NEUTRALISATION: &str = include_str!("../assets/prompts/def_neutralisation.txt");
const T_BASELINE: &str = include_str!("../assets/prompts/baseline.txt");
const T_RECIPE: &str = include_str!("../assets/prompts/recipe.txt");
const T_RECIPE_ETT: &str = include_str!("../assets/prompts/recipe_ett.txt");
const T_EQUIVALENTS: &str = include_str!("../assets/prompts/equivalents.txt");
const T_RECIPE_EQUIVALENTS: &str = include_str!("../assets/prompts/recipe_equivalents.txt");
const T_SINGLE: &str = include_str!("../assets/prompts/single.txt");
const T_RECIPE_SINGLE: &str = include_str!("../assets/prompts/recipe_single.txt");
const T_TRAILER_FINAL: &str = include_str!("../assets/prompts/trailer_final.txt");
const T_TRAILER_BEST: &str = include_str!("../assets/prompts/trailer_best.txt");

const TYPO: &str = "Similiar Recipe";
const TYPO_FIXED: &str = "Similar Recipe";

/// The template set in use. The verbatim set keeps the source spelling of
/// the recipe header; `fixed_typos` corrects it (and so gets a different
/// version string).
#[derive(Debug, Clone)]
pub struct Templates {
    texts: HashMap<&'static str, String>,
    version: String,
}

impl Default for Templates {
    fn default() -> Self {
        Self::new(false)
    }
}

impl Templates {
    pub fn new(fix_typos: bool) -> Self {
        let raw: [(&'static str, &'static str); 13] = [
            ("def_cultural", DEF_CULTURAL),
            ("def_functional", DEF_FUNCTIONAL),
            ("def_descriptive", DEF_DESCRIPTIVE),
            ("def_neutralisation", DEF_NEUTRALISATION),
            ("baseline", T_BASELINE),
            ("recipe", T_RECIPE),
            ("recipe_ett", T_RECIPE_ETT),
            ("equivalents", T_EQUIVALENTS),
            ("recipe_equivalents", T_RECIPE_EQUIVALENTS),
            ("single", T_SINGLE),
            ("recipe_single", T_RECIPE_SINGLE),
            ("trailer_final", T_TRAILER_FINAL),
            ("trailer_best", T_TRAILER_BEST),
        ];
        let texts: HashMap<&'static str, String> = raw
            .iter()
            .map(|(name, text)| {
                let text = if fix_typos { text.replace(TYPO, TYPO_FIXED) } else { text.to_string() };
                (*name, text)
            })
            .collect();
        let mut hasher = Sha256::new();
        for (name, _) in &raw {
            hasher.update(name.as_bytes());
            hasher.update([0]);
            hasher.update(texts[name].as_bytes());
            hasher.update([0]);
        }
        let version = hex::encode(&hasher.finalize()[..6]);
        Templates { texts, version }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Validates the strategy/recipe pairing and stamps the template version.
    pub fn spec(
        &self,
        strategy: Strategy,
        dish_name: &str,
        csi_span: Option<&str>,
        recipe: Option<Recipe>,
    ) -> Result<PromptSpec, PromptError> {
        if dish_name.trim().is_empty() {
            return Err(PromptError::EmptyDish);
        }
        match (strategy.requires_recipe(), recipe.is_some()) {
            (true, false) => return Err(PromptError::MissingRecipe(strategy)),
            (false, true) => return Err(PromptError::UnexpectedRecipe(strategy)),
            _ => {}
        }
        Ok(PromptSpec {
            strategy,
            dish_name: dish_name.trim().to_string(),
            csi_span: csi_span.map(|s| s.trim().to_string()).filter(|s| !s.is_empty()),
            recipe,
            template_version: self.version.clone(),
        })
    }

    fn text(&self, name: &str) -> &str {
        &self.texts[name]
    }

    pub fn render(&self, spec: &PromptSpec) -> String {
        let (body, definition) = match spec.strategy {
            Strategy::Baseline => ("baseline", None),
            Strategy::Recipe => ("recipe", None),
            Strategy::RecipeEtt => ("recipe_ett", None),
            Strategy::Equivalents => ("equivalents", None),
            Strategy::RecipeEquivalents => ("recipe_equivalents", None),
            Strategy::Neutralisation => ("single", Some("def_neutralisation")),
            Strategy::Cultural => ("single", Some("def_cultural")),
            Strategy::Descriptive => ("single", Some("def_descriptive")),
            Strategy::Functional => ("single", Some("def_functional")),
            Strategy::RecipeNeutralisation => ("recipe_single", Some("def_neutralisation")),
            Strategy::RecipeCultural => ("recipe_single", Some("def_cultural")),
            Strategy::RecipeDescriptive => ("recipe_single", Some("def_descriptive")),
            Strategy::RecipeFunctional => ("recipe_single", Some("def_functional")),
        };
        let (recipe_name, recipe_instructions) = match &spec.recipe {
            Some(r) => (r.name.as_str(), r.instructions.trim().trim_end_matches(['.', '。'])),
            None => ("", ""),
        };
        let values: HashMap<&str, &str> = [
            ("dish_name", spec.dish_name.as_str()),
            ("csi_span", spec.csi_span.as_deref().unwrap_or(&spec.dish_name)),
            ("recipe_name", recipe_name),
            ("recipe_instructions", recipe_instructions),
            ("cultural_definition", self.text("def_cultural")),
            ("functional_definition", self.text("def_functional")),
            ("descriptive_definition", self.text("def_descriptive")),
            ("strategy_definition", definition.map(|d| self.text(d)).unwrap_or("")),
        ]
        .into();
        let trailer = if spec.strategy.is_equivalents() { "trailer_best" } else { "trailer_final" };
        let mut out = fill(self.text(body), &values);
        out.push_str("\n\n");
        out.push_str(self.text(trailer));
        out
    }
}

/// Single-pass placeholder substitution: values are never rescanned, so a
/// dish name containing braces is inserted literally.
fn fill(template: &str, values: &HashMap<&str, &str>) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}').map(|close| (&after[..close], close)) {
            Some((name, close)) if values.contains_key(name) => {
                out.push_str(values[name]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub strategy: Strategy,
    pub dish_name: String,
    pub csi_span: Option<String>,
    pub recipe: Option<Recipe>,
    pub template_version: String,
}

impl PromptSpec {
    /// Builds a spec against the verbatim template set.
    pub fn new(strategy: Strategy, dish_name: &str, csi_span: Option<&str>, recipe: Option<Recipe>) -> Result<Self, PromptError> {
        Templates::default().spec(strategy, dish_name, csi_span, recipe)
    }
}

/// Renders with the verbatim template set.
pub fn render(spec: &PromptSpec) -> String {
    Templates::default().render(spec)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub entry_id: String,
    pub strategy: Strategy,
    pub prompt_text: String,
    pub template_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub translation: String,
    /// Set when the output markers were missing or unusable.
    pub warning: Option<String>,
}

fn marker_re() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\**\s*(FINAL|BEST)\s*\**\s*[:：]\s*\**\s*(.*?)\s*\**\s*$").unwrap())
}

fn option_re() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\**\s*([1-3])\s*[.)、]\s*(.+?)\s*$").unwrap())
}

fn label_re() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\**\s*(cultural|functional|descriptive)(\s+equivalent)?\s*\**\s*[:：\-–]\s*\**\s*").unwrap()
    })
}

fn clean(text: &str) -> String {
    text.trim().trim_matches('*').trim().trim_matches('"').trim().to_string()
}

/// Extracts the final translation from a model reply.
pub fn parse_response(strategy: Strategy, raw: &str) -> Result<ParsedResponse, PromptError> {
    let lines: Vec<&str> = raw.lines().filter(|l| !l.trim().is_empty()).collect();
    let Some(last) = lines.last() else {
        return Err(PromptError::EmptyResponse);
    };
    let mut final_marker = None;
    let mut best_marker = None;
    for line in &lines {
        if let Some(c) = marker_re().captures(line) {
            let value = c[2].to_string();
            match &c[1] {
                "FINAL" => final_marker = Some(value),
                _ => best_marker = Some(value),
            }
        }
    }
    let mut warning = None;
    if strategy.is_equivalents() {
        let mut options: [Option<String>; 3] = Default::default();
        for line in &lines {
            if let Some(c) = option_re().captures(line) {
                let n: usize = c[1].parse().expect("digit");
                let text = label_re().replace(&c[2], "");
                options[n - 1] = Some(clean(&text));
            }
        }
        match best_marker.as_deref().map(|b| b.trim_matches(|c: char| !c.is_ascii_digit())) {
            Some(b) => match b.parse::<usize>().ok().filter(|n| (1..=3).contains(n)) {
                Some(n) => match options[n - 1].take().filter(|t| !t.is_empty()) {
                    Some(text) => {
                        return Ok(ParsedResponse {
                            translation: text,
                            warning: None,
                        })
                    }
                    None => warning = Some(format!("BEST: {n} names a missing option")),
                },
                None => warning = Some(format!("unusable BEST selection `{b}`")),
            },
            None => warning = Some("no BEST marker".to_string()),
        }
    }
    if let Some(text) = final_marker.map(|t| clean(&t)).filter(|t| !t.is_empty()) {
        return Ok(ParsedResponse { translation: text, warning });
    }
    let translation = clean(last);
    let warning = warning.unwrap_or_else(|| "no FINAL marker".to_string());
    Ok(ParsedResponse {
        translation: if translation.is_empty() { last.trim().to_string() } else { translation },
        warning: Some(format!("{warning}; used last non-empty line")),
    })
}
