#pragma once

// Umbrella header for the panoptic-depth forecast evaluation toolkit.

#include "pdcq/baselines.hpp"
#include "pdcq/core.hpp"
#include "pdcq/depth_metrics.hpp"
#include "pdcq/ingest.hpp"
#include "pdcq/match.hpp"
#include "pdcq/metric.hpp"
#include "pdcq/oracle.hpp"
#include "pdcq/png_io.hpp"
#include "pdcq/report.hpp"
#include "pdcq/runner.hpp"
#include "pdcq/synth.hpp"
