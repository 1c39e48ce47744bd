#pragma once

namespace cosca::cli {

// full command dispatch; returns the process exit code:
// 0 success, 2 configuration error, 3 non-finite loss abort, 4 i/o failure
int run_main(int argc, char** argv);

}  // namespace cosca::cli
