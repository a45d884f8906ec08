// SPDX-License-Identifier: Apache-2.0

use tbloop::config::{LlmProvider, SimProvider};
use tbloop::{CliError, Config};

fn rejected(text: &str) -> String {
    match Config::parse(text) {
        Err(CliError::Config(m)) => m,
        other => panic!("expected a config error for {text:?}, got {other:?}"),
    }
}

#[test]
fn empty_file_gives_defaults() {
    let cfg = Config::parse("").unwrap();
    assert_eq!(cfg, Config::default());
    assert_eq!(cfg.simulator.provider, SimProvider::Process);
    assert_eq!(cfg.llm.provider, LlmProvider::Http);
    assert_eq!(cfg.llm.api_key_env, "TBLOOP_API_KEY");
    let p = cfg.pipeline_config();
    assert_eq!((p.max_draft_attempts, p.max_improve_attempts, p.max_rectify_iterations), (3, 3, 3));
    assert_eq!(p.coverage_threshold, 90.0);
    let s = cfg.sampling_params();
    assert_eq!((s.temperature, s.top_p, s.top_k), (0.8, Some(0.95), Some(50)));
}

#[test]
fn sample_configs_parse() {
    for name in ["iverilog.toml", "mock.toml"] {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
        let cfg = Config::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
        if name == "mock.toml" {
            assert!(cfg.mock_script.unwrap().is_absolute());
        }
    }
}

#[test]
fn unknown_keys_are_rejected() {
    // There is deliberately no place to put a secret.
    rejected("[llm]\napi_key = \"sk-123\"\n");
    rejected("[simulator]\ncompiler = \"iverilog\"\n");
    rejected("verbose = true\n");
    rejected("[llm.temperatures]\nanalyse = 0.1\n");
}

#[test]
fn invalid_values_are_rejected() {
    assert!(rejected("[simulator]\ncompile_command = \"iverilog {tb} {dut}\"\n").contains("{out}"));
    assert!(rejected("[simulator]\nrun_command = \"vvp\"\n").contains("{out}"));
    rejected("[simulator]\ntimeout_secs = 0.0\n");
    rejected("[simulator]\ntimeout_secs = -1.0\n");
    rejected("[simulator]\ncoverage_command = \"  \"\n");
    rejected("[llm]\napi_key_env = \"\"\n");
    rejected("[llm]\nprovider = \"mock\"\n");
    rejected("[simulator]\nprovider = \"mock\"\n");
    rejected("[pipeline]\nmax_draft_attempts = 0\n");
    rejected("[pipeline]\ncoverage_threshold = 101.0\n");
    rejected("[sampling]\nn = 0\n");
    rejected("[sampling]\ntop_p = 1.5\n");
    rejected("[sampling]\ntop_k = 0\n");
    rejected("[llm]\nprovider = \"grpc\"\n");
}

#[test]
fn overrides_reach_the_pipeline() {
    let cfg = Config::parse(
        "mock_script = \"s.json\"\n[llm]\nprovider = \"mock\"\n[llm.temperatures]\ndraft = 0.3\n\
         [pipeline]\nmax_rectify_iterations = 1\nskip_coverage = true\n",
    )
    .unwrap();
    let p = cfg.pipeline_config();
    assert_eq!(p.temperatures.draft, 0.3);
    assert_eq!(p.max_rectify_iterations, 1);
    assert!(p.skip_coverage);
}

#[test]
fn missing_file_is_an_io_error() {
    let e = Config::load(std::path::Path::new("/nonexistent/tbloop.toml")).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn readme_example_parses_to_defaults() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n").unwrap() + "```toml\n".len();
    let block = &readme[start..start + readme[start..].find("```").unwrap()];
    assert_eq!(Config::parse(block).unwrap(), Config::default());
}
