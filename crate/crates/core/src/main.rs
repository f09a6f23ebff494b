use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sdml::check::check_config;
use sdml::config::{parse_config, RunConfig};
use sdml::macrospin::{run_macrospin, MacrospinParams};
use sdml::mms::{run_mms_study, MmsKind, DEFAULT_LADDER};
use sdml::presets;
use sdml::runner;

#[derive(Parser)]
#[command(name = "sdml", version, about = "Spin drift-diffusion, Maxwell and LLG simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a preset name and write diagnostics.csv.
    Run {
        config: String,
        /// Output directory; defaults to the config's `output.directory`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a config with one record per step and evaluate the invariant suite.
    Check { config: String },
    /// Grid-refinement study: TRANSPORT, MAXWELL or LLG_EXCHANGE.
    Mms {
        kind: MmsKind,
        /// Grid sizes, at least three, increasing.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LADDER)]
        ladder: Vec<usize>,
    },
    /// Single-domain LLG run against the closed-form trajectory. Parameters
    /// are a JSON5 object with keys alpha, h, m0, dt, t_end, scheme.
    Macrospin {
        #[arg(default_value = "{}")]
        params: String,
    },
    /// List the built-in presets.
    Presets,
}

fn load(source: &str) -> sdml::Result<RunConfig> {
    if let Some(text) = presets::preset_text(source) {
        return parse_config(text);
    }
    parse_config(&std::fs::read_to_string(source)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => load(&config).and_then(|cfg| {
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
            let summary = runner::execute(&cfg, Some(&dir))?;
            println!(
                "{} steps, {} records, max Picard iterations {}, output in {}",
                summary.reports.len(),
                summary.records.len(),
                summary.max_picard_iters,
                dir.display()
            );
            Ok(true)
        }),
        Command::Check { config } => load(&config).and_then(|cfg| {
            let (report, _) = check_config(&cfg)?;
            println!("{report}");
            Ok(report.passed())
        }),
        Command::Mms { kind, ladder } => run_mms_study(kind, &ladder).map(|table| {
            print!("{table}");
            true
        }),
        Command::Macrospin { params } => MacrospinParams::parse(&params)
            .and_then(|p| run_macrospin(&p))
            .map(|r| {
                println!("steps           {}", r.steps);
                println!("m(t_end)        {:.12e} {:.12e} {:.12e}", r.m_final.x, r.m_final.y, r.m_final.z);
                println!("exact           {:.12e} {:.12e} {:.12e}", r.m_exact.x, r.m_exact.y, r.m_exact.z);
                println!("max error       {:.6e}", r.max_error);
                println!("max |m|-1       {:.6e}", r.max_unit_defect);
                true
            }),
        Command::Presets => {
            presets::names().for_each(|n| println!("{n}"));
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
