#pragma once

#include "kgif/error.hpp"
#include "kgif/numeric.hpp"
#include "kgif/ckg_data.hpp"
#include "kgif/kg_embed.hpp"
#include "kgif/fusion.hpp"
#include "kgif/propagation.hpp"
#include "kgif/eval.hpp"
#include "kgif/recommender.hpp"
#include "kgif/explain.hpp"
#include "kgif/config.hpp"
#include "kgif/synthetic.hpp"
#include "kgif/commands.hpp"
