#pragma once

// Umbrella header.
#include "ebfkit/covstruct.hpp"
#include "ebfkit/crossed_model.hpp"
#include "ebfkit/draws.hpp"
#include "ebfkit/ebf.hpp"
#include "ebfkit/errors.hpp"
#include "ebfkit/ess.hpp"
#include "ebfkit/gibbs.hpp"
#include "ebfkit/linalg.hpp"
#include "ebfkit/manifest.hpp"
#include "ebfkit/numeric.hpp"
#include "ebfkit/posterior.hpp"
#include "ebfkit/report.hpp"
#include "ebfkit/sampling.hpp"
#include "ebfkit/study.hpp"
