// Marking state: the timestamps an annotator has placed on the timeline and
// the rules that decide when a submission is allowed.
//
// Conventional mode captures two timestamps (start, end). Rubicon mode
// captures three (pre-start, boundary, end) and derives the two phases as
// pre_actional = [pre-start, boundary], actional = [boundary, end], so the
// adjacency requirement cannot be violated by construction.

import type { AnnotationPayload, SchemaName } from "./types.js";

export type Mode = SchemaName;

export type ConventionalRole = "start" | "end";
export type RubiconRole = "pre_start" | "boundary" | "end";
export type Role = ConventionalRole | RubiconRole;

const ROLE_ORDER: Record<Mode, Role[]> = {
  conventional: ["start", "end"],
  rubicon: ["pre_start", "boundary", "end"],
};

export interface MarkingState {
  mode: Mode;
  frameRate: number;
  snap: boolean;
  marks: Partial<Record<Role, number>>;
}

export function createMarking(mode: Mode, frameRate: number, snap = true): MarkingState {
  if (frameRate <= 0) throw new Error(`frame rate must be positive, got ${frameRate}`);
  return { mode, frameRate, snap, marks: {} };
}

export function rolesFor(mode: Mode): Role[] {
  return ROLE_ORDER[mode].slice();
}

/** Displayed and recorded timestamps sit on the frame grid when snapping. */
export function snapToFrame(t: number, frameRate: number): number {
  return Math.round(t * frameRate) / frameRate;
}

/** Record (or replace) one role's timestamp at the playhead. */
export function mark(state: MarkingState, role: Role, playhead: number): MarkingState {
  if (!ROLE_ORDER[state.mode].includes(role)) {
    throw new Error(`role ${role} is not valid in ${state.mode} mode`);
  }
  const t = state.snap ? snapToFrame(playhead, state.frameRate) : playhead;
  return { ...state, marks: { ...state.marks, [role]: t } };
}

export function clearMark(state: MarkingState, role: Role): MarkingState {
  const marks = { ...state.marks };
  delete marks[role];
  return { ...state, marks };
}

/** Roles still missing before the marking is complete. */
export function missingRoles(state: MarkingState): Role[] {
  return ROLE_ORDER[state.mode].filter((role) => state.marks[role] === undefined);
}

/**
 * Inline ordering problems. Marks must be strictly increasing in role order;
 * violations are state to show, never exceptions.
 */
export function orderingViolations(state: MarkingState): string[] {
  const order = ROLE_ORDER[state.mode];
  const violations: string[] = [];
  for (let i = 0; i + 1 < order.length; i++) {
    const a = order[i]!;
    const b = order[i + 1]!;
    const ta = state.marks[a];
    const tb = state.marks[b];
    if (ta !== undefined && tb !== undefined && !(ta < tb)) {
      violations.push(`${b} must come after ${a}`);
    }
  }
  return violations;
}

export function canSubmit(state: MarkingState): boolean {
  return missingRoles(state).length === 0 && orderingViolations(state).length === 0;
}

export interface SubmissionContext {
  sessionId: string;
  annotationId: string;
  videoId: string;
  actionClass: string;
  annotatorId: string;
  instanceKey: string;
}

/** Derive the service payload. Rubicon adjacency holds by construction. */
export function toPayload(state: MarkingState, ctx: SubmissionContext): AnnotationPayload {
  if (!canSubmit(state)) {
    throw new Error("marking incomplete or out of order");
  }
  const base = {
    session_id: ctx.sessionId,
    annotation_id: ctx.annotationId,
    video_id: ctx.videoId,
    class: ctx.actionClass,
    annotator_id: ctx.annotatorId,
    schema: state.mode,
    instance_key: ctx.instanceKey,
  };
  if (state.mode === "conventional") {
    return { ...base, interval: { start: state.marks.start!, end: state.marks.end! } };
  }
  const boundary = state.marks.boundary!;
  return {
    ...base,
    rb: {
      pre_actional: { start: state.marks.pre_start!, end: boundary },
      actional: { start: boundary, end: state.marks.end! },
    },
  };
}
