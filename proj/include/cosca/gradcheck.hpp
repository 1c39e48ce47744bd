#pragma once

#include <cstdint>
#include <iosfwd>

namespace cosca::gradcheck {

// central finite differences over every parameter of a small smooth model,
// one line per loss with its worst relative error; corrupt=true injects a
// deliberate error into one analytic gradient and must make the check fail
bool run_gradcheck(std::ostream& out, std::uint64_t seed = 0, int instances_per_loss = 20,
                   bool corrupt = false);

}  // namespace cosca::gradcheck
