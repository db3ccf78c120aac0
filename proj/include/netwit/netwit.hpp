#pragma once

// Umbrella header.

#include "netwit/error.hpp"
#include "netwit/metric_space.hpp"
#include "netwit/transport.hpp"
#include "netwit/nets.hpp"
#include "netwit/tree.hpp"
#include "netwit/random.hpp"
#include "netwit/l1_testers.hpp"
#include "netwit/wit.hpp"
#include "netwit/generators.hpp"
#include "netwit/io.hpp"
#include "netwit/harness.hpp"
