// View model for the live consistency panel.
//
// The panel is a window onto the service's numbers: the UI never computes
// IoU or statistics itself. Every displayed value is the service value,
// stringified without rounding, so a panel reading always matches an offline
// run over the exported store.

import type { ConsistencyResponse } from "./types.js";

export interface PanelModel {
  nAnnotators: number;
  /** Per-pair IoU values, stringified verbatim. */
  pairs: string[];
  mean: string | null;
  /** min / q1 / median / q3 / max, stringified verbatim. */
  quartiles: string[] | null;
  headline: string;
}

export function panelModel(response: ConsistencyResponse): PanelModel {
  const { n_annotators, pair_ious, mean, quartiles } = response;
  if (mean === null || pair_ious.length === 0) {
    return {
      nAnnotators: n_annotators,
      pairs: [],
      mean: null,
      quartiles: null,
      headline:
        n_annotators <= 1
          ? "You are the first annotator for this instance."
          : "Not enough comparable annotations yet.",
    };
  }
  return {
    nAnnotators: n_annotators,
    pairs: pair_ious.map((value) => String(value)),
    mean: String(mean),
    quartiles: quartiles === null ? null : quartiles.map((value) => String(value)),
    headline: `${n_annotators} annotations, mean pairwise IoU ${String(mean)}`,
  };
}
