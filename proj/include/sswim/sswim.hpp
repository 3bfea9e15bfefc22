// Umbrella header.
#pragma once

#include "sswim/core.hpp"
#include "sswim/kernels.hpp"
#include "sswim/srm_network.hpp"
#include "sswim/model_io.hpp"
#include "sswim/sampling.hpp"
#include "sswim/hidden_construction.hpp"
#include "sswim/output_construction.hpp"
#include "sswim/harness.hpp"
#include "sswim/training.hpp"
#include "sswim/config.hpp"
