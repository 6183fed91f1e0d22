#pragma once

namespace pshuf {

// Entry point behind the `pshuf` binary. Exit codes: 0 success, 1 usage
// error, 2 data error (bad file, unknown token, malformed dump).
int run_cli(int argc, const char* const* argv);

}  // namespace pshuf
