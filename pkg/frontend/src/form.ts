/**
 * Decision-form rules, kept pure so they are testable and mirror the
 * server's invariants exactly:
 *   - accept requires all four rubric checks;
 *   - reject requires a failed check or a non-empty note.
 *
 * The server enforces both independently; the client rules only exist to
 * keep reviewers from submitting requests that would bounce.
 */

import type { Rubric } from "./api.js";

export const RUBRIC_FLAGS = [
  "object_recognition",
  "spatial_logic",
  "mask_quality",
  "grammar",
] as const;

export type RubricFlag = (typeof RUBRIC_FLAGS)[number];

export const RUBRIC_LABELS: Record<RubricFlag, string> = {
  object_recognition: "Object recognition correct",
  spatial_logic: "Spatial description & logic consistent",
  mask_quality: "Mask precise and complete",
  grammar: "Grammar correct",
};

/** Flags a reviewer can actually toggle for this review stage. */
export function editableFlags(stage: string): readonly RubricFlag[] {
  // mask review uses the reduced rubric: only mask quality is under review
  return stage === "mask_review" ? (["mask_quality"] as const) : RUBRIC_FLAGS;
}

export function allChecked(rubric: Rubric): boolean {
  return RUBRIC_FLAGS.every((flag) => rubric[flag]);
}

export function canAccept(rubric: Rubric): boolean {
  return allChecked(rubric);
}

export function canReject(rubric: Rubric, notes: string): boolean {
  return !allChecked(rubric) || notes.trim().length > 0;
}

/** Initial rubric for a stage: reduced-rubric flags start true and locked. */
export function initialRubric(stage: string): Rubric {
  const editable = new Set<string>(editableFlags(stage));
  return {
    object_recognition: !editable.has("object_recognition"),
    spatial_logic: !editable.has("spatial_logic"),
    mask_quality: false,
    grammar: !editable.has("grammar"),
  };
}
