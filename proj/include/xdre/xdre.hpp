#ifndef XDRE_XDRE_HPP_
#define XDRE_XDRE_HPP_

#include "xdre/data/codred.hpp"
#include "xdre/data/json_io.hpp"
#include "xdre/data/preprocess.hpp"
#include "xdre/data/synth.hpp"
#include "xdre/data/types.hpp"
#include "xdre/debias/debias.hpp"
#include "xdre/eval/evaluate.hpp"
#include "xdre/eval/metrics.hpp"
#include "xdre/model/config.hpp"
#include "xdre/model/model.hpp"
#include "xdre/train/ablation.hpp"
#include "xdre/train/checkpoint.hpp"
#include "xdre/train/pipeline.hpp"
#include "xdre/train/trainer.hpp"

#endif  // XDRE_XDRE_HPP_
