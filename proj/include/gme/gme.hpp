#pragma once

// Gaussian-mixture embeddings for similarity search: umbrella header.

#include "gme/bench.hpp"
#include "gme/corpus.hpp"
#include "gme/divergence.hpp"
#include "gme/error.hpp"
#include "gme/index.hpp"
#include "gme/metrics.hpp"
#include "gme/paramgen.hpp"
#include "gme/parallel.hpp"
#include "gme/rng.hpp"
#include "gme/serialize.hpp"
#include "gme/synth.hpp"
#include "gme/training.hpp"
#include "gme/types.hpp"
