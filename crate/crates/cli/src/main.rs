use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mdl_core::codec::CodeConfig;
use mdl_harness::{
    compress_file, decompress_file, load_family, run, ExperimentSpec, Overrides, SymbolFormat, EXIT_CONFIG,
};

#[derive(Parser)]
#[command(name = "mdl", version, about = "Two-part MDL codes: experiments and compression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// Seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Weight on the parameter description length (also sets λ = 1 − 1/α).
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Quantization scale.
    #[arg(long, global = true)]
    a: Option<f64>,
    /// Large-cell exponent.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Width constant of the tilt ball.
    #[arg(long, global = true)]
    g: Option<f64>,
    /// Exponent of the zero-tilt code length.
    #[arg(long, global = true)]
    nu: Option<f64>,
    /// Exponent of the route switch length.
    #[arg(long, global = true)]
    iota: Option<f64>,
    /// Quantize parameters only, without local tilts.
    #[arg(long, global = true)]
    no_bundle: bool,
    /// Output directory for `run`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            alpha: self.alpha,
            a: self.a,
            beta: self.beta,
            g: self.g,
            nu: self.nu,
            iota: self.iota,
            no_bundle: self.no_bundle,
            out: self.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec (TOML or JSON).
    Run { spec: PathBuf },
    /// Compress a symbol file.
    Compress(CodecArgs),
    /// Restore a symbol file.
    Decompress(CodecArgs),
}

#[derive(Args)]
struct CodecArgs {
    /// Family spec file (TOML or JSON).
    #[arg(long)]
    family: PathBuf,
    input: PathBuf,
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = SymbolFormat::Bytes)]
    format: SymbolFormat,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = cli.flags.overrides();
    let result = match cli.command {
        Command::Run { spec } => ExperimentSpec::load(&spec, &overrides).and_then(|s| run(&s)).map(|o| {
            for c in &o.manifest.certificates {
                println!("n = {}: {}", c.n, if c.passed { "PASSED" } else { "FAILED" });
            }
            println!("manifest: {}", o.manifest_path.display());
            o.exit_code()
        }),
        Command::Compress(args) => {
            let mut config = CodeConfig::default();
            overrides.apply(&mut config);
            load_family(&args.family)
                .and_then(|f| compress_file(&f, &args.input, &args.output, args.format, &config))
                .map(|r| {
                    println!(
                        "n = {}: ideal {:.1} bits, achieved {} bits, file {} bytes",
                        r.n, r.ideal_bits, r.payload_bits, r.file_bytes
                    );
                    0
                })
        }
        Command::Decompress(args) => {
            let mut config = CodeConfig::default();
            overrides.apply(&mut config);
            load_family(&args.family)
                .and_then(|f| decompress_file(&f, &args.input, &args.output, args.format, &config))
                .map(|n| {
                    println!("n = {n}: restored {}", args.output.display());
                    0
                })
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("mdl: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
