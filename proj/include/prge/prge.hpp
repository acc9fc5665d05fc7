#pragma once

// Umbrella header.

#include "prge/embed.hpp"
#include "prge/error.hpp"
#include "prge/eval.hpp"
#include "prge/experiment.hpp"
#include "prge/graph.hpp"
#include "prge/graph_io.hpp"
#include "prge/model_io.hpp"
#include "prge/noise.hpp"
#include "prge/pathrank.hpp"
#include "prge/pipeline.hpp"
#include "prge/report.hpp"
#include "prge/synthetic.hpp"
