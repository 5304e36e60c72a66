#![no_main]

use clap::Parser;
use libfuzzer_sys::fuzz_target;
use rfreg_cli::args::Cli;

// Newline-separated argument vectors through the flag and value parsers.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let args = std::iter::once("rfreg").chain(text.split('\n'));
    let _ = Cli::try_parse_from(args);
});
