#pragma once

#include "reefmap/analytics.hpp"
#include "reefmap/annotate.hpp"
#include "reefmap/core.hpp"
#include "reefmap/dataset.hpp"
#include "reefmap/delaunay.hpp"
#include "reefmap/error.hpp"
#include "reefmap/grf.hpp"
#include "reefmap/hash.hpp"
#include "reefmap/ingest.hpp"
#include "reefmap/metrics.hpp"
#include "reefmap/pipeline.hpp"
#include "reefmap/png.hpp"
#include "reefmap/predicates.hpp"
#include "reefmap/rasterize.hpp"
#include "reefmap/synth.hpp"
