use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::Deserialize;
use synergy_core::coder::CoderConfig;
use synergy_core::{
    AggregateOptions, CodeSource, Normalization, SdmOptions, SignConvention, StandardizationScope,
    SynergyOptions, WeekLinking,
};

use crate::{Common, LinkArg, NormArg, ScopeArg, SignArg, SourceArg};

pub const DEFAULT_ITERATIONS: usize = 10_000;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Scripted replies used instead of a chat-completion endpoint.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockConfig {
    /// Use the keyword rules of the bundled synthetic corpus.
    pub builtin: bool,
    /// `[keyword, reply]` pairs, first match wins.
    pub rules: Vec<(String, String)>,
    pub fallback: Option<String>,
}

/// The TOML document accepted by `--config`. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub utterances: Option<PathBuf>,
    pub groups: Option<PathBuf>,
    pub codebook: Option<PathBuf>,
    pub code_source: Option<String>,
    pub normalization: Option<String>,
    pub scope: Option<String>,
    pub sign: Option<String>,
    pub linking: Option<String>,
    pub zero_fill: Option<bool>,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub holm: Option<bool>,
    pub coder: Option<CoderConfig>,
    pub mock: Option<MockConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.utterances, &mut cfg.groups, &mut cfg.codebook, &mut cfg.out_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(dir) = cfg.coder.as_mut().and_then(|c| c.cache_dir.as_mut()) {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub utterances: Option<PathBuf>,
    pub groups: Option<PathBuf>,
    pub codebook: Option<PathBuf>,
    pub aggregate: AggregateOptions,
    pub sdm: SdmOptions,
    pub seed: Option<u64>,
    pub iterations: usize,
    pub out_dir: PathBuf,
    pub alpha: f64,
    pub holm: bool,
    pub coder: CoderConfig,
    pub mock: Option<MockConfig>,
}

fn pick<A: ValueEnum>(flag: Option<A>, file: Option<&String>, name: &str) -> Result<Option<A>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match file {
        None => Ok(None),
        Some(s) => match A::from_str(&s.replace('_', "-"), true) {
            Ok(v) => Ok(Some(v)),
            Err(_) => bail!("config: unknown {name} value {s:?}"),
        },
    }
}

impl RunConfig {
    /// Flags override the config file, which overrides the defaults.
    pub fn resolve(common: &Common) -> Result<Self> {
        let file = match &common.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let source = pick(common.code_source, file.code_source.as_ref(), "code_source")?
            .unwrap_or(SourceArg::Human);
        let norm = pick(common.normalization, file.normalization.as_ref(), "normalization")?
            .unwrap_or(NormArg::PerMember);
        let scope =
            pick(common.scope, file.scope.as_ref(), "scope")?.unwrap_or(ScopeArg::Global);
        let sign = pick(common.sign, file.sign.as_ref(), "sign")?.unwrap_or(SignArg::Prose);
        let linking =
            pick(common.linking, file.linking.as_ref(), "linking")?.unwrap_or(LinkArg::Consecutive);
        let alpha = common.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA);
        if !(alpha > 0.0 && alpha < 1.0) {
            bail!("alpha must lie in (0, 1), got {alpha}");
        }
        let iterations = common.iterations.or(file.iterations).unwrap_or(DEFAULT_ITERATIONS);
        if iterations == 0 {
            bail!("iterations must be positive");
        }
        Ok(RunConfig {
            utterances: common.utterances.clone().or(file.utterances),
            groups: common.groups.clone().or(file.groups),
            codebook: common.codebook.clone().or(file.codebook),
            aggregate: AggregateOptions {
                code_source: source.into(),
                normalization: norm.into(),
                zero_fill: common.zero_fill || file.zero_fill.unwrap_or(false),
            },
            sdm: SdmOptions {
                scope: scope.into(),
                synergy: SynergyOptions {
                    sign: sign.into(),
                    linking: linking.into(),
                },
            },
            seed: common.seed.or(file.seed),
            iterations,
            out_dir: common
                .out_dir
                .clone()
                .or(file.out_dir)
                .unwrap_or_else(|| PathBuf::from("out")),
            alpha,
            holm: common.holm || file.holm.unwrap_or(false),
            coder: file.coder.unwrap_or_default(),
            mock: file.mock,
        })
    }

    pub fn utterances(&self) -> Result<&Path> {
        self.utterances
            .as_deref()
            .context("no utterances file (use --utterances or set it in the config)")
    }

    pub fn groups(&self) -> Result<&Path> {
        self.groups
            .as_deref()
            .context("no group profiles file (use --groups or set it in the config)")
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .context("this subcommand is stochastic and needs --seed (or seed in the config)")
    }
}

impl From<SourceArg> for CodeSource {
    fn from(a: SourceArg) -> Self {
        match a {
            SourceArg::Human => CodeSource::Human,
            SourceArg::Pred => CodeSource::Pred,
        }
    }
}

impl From<NormArg> for Normalization {
    fn from(a: NormArg) -> Self {
        match a {
            NormArg::PerMember => Normalization::PerMember,
            NormArg::Raw => Normalization::RawCount,
        }
    }
}

impl From<ScopeArg> for StandardizationScope {
    fn from(a: ScopeArg) -> Self {
        match a {
            ScopeArg::Global => StandardizationScope::Global,
            ScopeArg::PerGroup => StandardizationScope::PerGroup,
        }
    }
}

impl From<SignArg> for SignConvention {
    fn from(a: SignArg) -> Self {
        match a {
            SignArg::Prose => SignConvention::Prose,
            SignArg::PaperLiteral => SignConvention::PaperLiteral,
        }
    }
}

impl From<LinkArg> for WeekLinking {
    fn from(a: LinkArg) -> Self {
        match a {
            LinkArg::Consecutive => WeekLinking::Consecutive,
            LinkArg::BridgeGaps => WeekLinking::BridgeGaps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_accept_snake_case() {
        assert_eq!(
            pick::<SignArg>(None, Some(&"paper_literal".to_string()), "sign").unwrap(),
            Some(SignArg::PaperLiteral)
        );
        assert_eq!(
            pick(Some(SignArg::Prose), Some(&"paper-literal".to_string()), "sign").unwrap(),
            Some(SignArg::Prose)
        );
        assert!(pick::<NormArg>(None, Some(&"weekly".to_string()), "normalization").is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = std::env::temp_dir().join(format!("synergy-cfg-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        fs::write(
            &path,
            "utterances = \"u.csv\"\nseed = 4\n[coder]\nmodel_name = \"m\"\ncache_dir = \"cache\"\n[mock]\nrules = [[\"plan\", \"C1\"]]\n",
        )
        .unwrap();
        let cfg = FileConfig::load(&path).unwrap();
        assert_eq!(cfg.utterances, Some(dir.join("u.csv")));
        let coder = cfg.coder.unwrap();
        assert_eq!(coder.model_name, "m");
        assert_eq!(coder.cache_dir, Some(dir.join("cache")));
        assert_eq!(coder.max_retries, CoderConfig::default().max_retries);
        assert_eq!(cfg.mock.unwrap().rules, vec![("plan".into(), "C1".into())]);
        fs::remove_dir_all(&dir).unwrap();
    }
}
