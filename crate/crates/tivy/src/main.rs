use std::process::ExitCode;

use clap::Parser;
use tivy::cli::{self, Cli, CliError, Command};
use tivy::service::{self, AppState};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cli::run(args).map(|report| {
            let doc = &report.document;
            let t = report.run.timings;
            println!("groups: {}", doc.groups.len());
            println!("coverage: {:.6}", doc.coverage);
            println!(
                "timings: clustering={:.3}s mining={:.3}s extraction={:.3}s stats={:.3}s search={:.3}s",
                t.clustering.as_secs_f64(),
                t.mining.as_secs_f64(),
                t.extraction.as_secs_f64(),
                t.stats.as_secs_f64(),
                t.search.as_secs_f64()
            );
            println!("output: {}", args.output.display());
            if doc.groups.is_empty() {
                eprintln!("warning: no pattern reaches minsup {}; the summary has 0 groups", args.params.minsup);
            }
        }),
        Command::Synth(args) => cli::synth(args),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn serve(args: &cli::ServeArgs) -> Result<(), CliError> {
    let (state, queue) = AppState::new();
    if let Some(dir) = &args.data_dir {
        service::preload(&state, dir, &args.input_args.csv_options(), args.input_args.normalization())
            .map_err(|e| CliError::Io(format!("{e:#}")))?;
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    rt.block_on(service::serve(&args.host, args.port, state, queue))
        .map_err(|e| CliError::Io(format!("{e:#}")))
}
