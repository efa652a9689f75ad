#pragma once

#include "ddfh/core/fuse.hpp"
#include "ddfh/core/io.hpp"
#include "ddfh/core/types.hpp"
#include "ddfh/density/gmm.hpp"
#include "ddfh/density/gmm_json.hpp"
#include "ddfh/density/kmeanspp.hpp"
#include "ddfh/error.hpp"
#include "ddfh/reduce/tsne.hpp"
#include "ddfh/rng.hpp"
#include "ddfh/scoring/indicators.hpp"
#include "ddfh/scoring/normal.hpp"
#include "ddfh/scoring/quantile.hpp"
#include "ddfh/select/config.hpp"
#include "ddfh/select/pipeline.hpp"
#include "ddfh/select/selection.hpp"
#include "ddfh/version.hpp"
