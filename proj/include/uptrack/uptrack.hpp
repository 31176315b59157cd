#pragma once

// Convenience umbrella: the whole library in one include.

#include "uptrack/benchmark.hpp"
#include "uptrack/errors.hpp"
#include "uptrack/evaluation.hpp"
#include "uptrack/experiment.hpp"
#include "uptrack/geometry.hpp"
#include "uptrack/image.hpp"
#include "uptrack/io.hpp"
#include "uptrack/rng.hpp"
#include "uptrack/synthetic.hpp"
#include "uptrack/tensor.hpp"
#include "uptrack/tracker.hpp"
#include "uptrack/training.hpp"
#include "uptrack/update.hpp"
#include "uptrack/update_net.hpp"
