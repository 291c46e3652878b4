#pragma once

#include "pfeddl/dataio.hpp"
#include "pfeddl/types.hpp"

namespace pfeddl::profiles {

/// Desk-scale planted federation: d=64, 16 atoms of which 10 shared, four
/// sites of 150 samples, three atoms per sample.
io::SyntheticSpec quickstart_spec();

/// Hyperparameters that train quickstart_spec() to high accuracy in seconds.
Hyperparams quickstart_hyperparams();

}  // namespace pfeddl::profiles
