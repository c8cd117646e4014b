#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cwr/dataset.hpp"
#include "cwr/errors.hpp"

namespace cwr::cli {

/// Process exit codes.
///   0  success
///   1  I/O failure (unreadable input, unwritable output)
///   2  bad arguments or configuration
///   3  data error (malformed file, checksum, labels, empty set)
///   4  numeric failure (non-finite values, infeasible iterate)
enum ExitCode : int { ok = 0, io_failure = 1, bad_args = 2, data_error = 3, numeric_failure = 4 };

int exit_code_for(Error::Category category);

/// "a/b" or a decimal, e.g. "8/255" or "0.031". Must be finite and >= 0.
double parse_epsilon(std::string_view text);

/// Dataset reference accepted by --data:
///   synthetic:classes=10,per_class=100,shape=3x16x16,sep=0.5,noise=0.1,block=4,seed=0,split=train
///   cifar:PATH          raw CIFAR-10 binary batch
///   PATH                payload written by save_dataset (with its .json sidecar)
LabeledDataset load_data(std::string_view spec);

/// Runs one subcommand. `args` excludes the program name. Diagnostics go to
/// `err` as lines starting with "error:".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cwr::cli
