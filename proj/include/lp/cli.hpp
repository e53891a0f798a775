#pragma once

namespace lp {

// Full command-line surface of the latentprobe tool. Returns the process
// exit code: 0 success, 1 domain error, 2 usage error.
int run_cli(int argc, char** argv);

}  // namespace lp
