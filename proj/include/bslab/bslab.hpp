#pragma once

#include "bslab/blocks.hpp"
#include "bslab/bounds.hpp"
#include "bslab/drift.hpp"
#include "bslab/dynamics.hpp"
#include "bslab/error.hpp"
#include "bslab/exact.hpp"
#include "bslab/graph.hpp"
#include "bslab/io.hpp"
#include "bslab/montecarlo.hpp"
#include "bslab/percolation.hpp"
#include "bslab/rng.hpp"
#include "bslab/stats.hpp"
