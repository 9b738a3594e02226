#ifndef ROADMRF_ROADMRF_HPP
#define ROADMRF_ROADMRF_HPP

// Umbrella header: reconstruction of unobserved road-traffic densities with
// a Gaussian Markov random field over the road network.

#include "roadmrf/colors.hpp"
#include "roadmrf/common.hpp"
#include "roadmrf/datagen.hpp"
#include "roadmrf/eval.hpp"
#include "roadmrf/gmrf.hpp"
#include "roadmrf/graph.hpp"
#include "roadmrf/io.hpp"
#include "roadmrf/learn.hpp"
#include "roadmrf/linalg.hpp"
#include "roadmrf/reconstruct.hpp"
#include "roadmrf/rng.hpp"
#include "roadmrf/threads.hpp"

#endif  // ROADMRF_ROADMRF_HPP
