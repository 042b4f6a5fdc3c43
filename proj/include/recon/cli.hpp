#pragma once

// Command-line front end. Subcommands: gen-data, synthesize, train, certify,
// identify, reconstruct, evaluate, demo-nonidentifiable, report. Exit codes:
// 0 success, 1 configuration error, 2 numerical failure; failures also emit
// a machine-readable error JSON on stderr and in the output directory.

namespace recon {

int cli_main(int argc, char** argv);

}  // namespace recon
