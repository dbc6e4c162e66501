// Umbrella header.
#pragma once

#include "qguard/werner.hpp"
#include "qguard/random.hpp"
#include "qguard/types.hpp"
#include "qguard/topology.hpp"
#include "qguard/topology_io.hpp"
#include "qguard/link_state.hpp"
#include "qguard/purification.hpp"
#include "qguard/path_metrics.hpp"
#include "qguard/path_selection.hpp"
#include "qguard/recovery_planning.hpp"
#include "qguard/slot_engine.hpp"
#include "qguard/experiment.hpp"
