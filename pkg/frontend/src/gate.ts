// Control-question gate flow for Rubicon sessions. Conventional sessions are
// gate-exempt. A failed attempt (while retries remain) shows the phase
// definitions again before the retry; exhausted retries lock the session to
// read-only.

import type { GateQuestion, GateResult, SchemaName } from "./types.js";

export type GateStatus = "passed" | "pending" | "retry" | "locked";

export interface GateState {
  status: GateStatus;
  attempts: number;
  questions: GateQuestion[];
  showDefinitions: boolean;
}

export function initialGate(schema: SchemaName, questions: GateQuestion[], alreadyPassed = false): GateState {
  if (schema === "conventional" || alreadyPassed) {
    return { status: "passed", attempts: 0, questions: [], showDefinitions: false };
  }
  return { status: "pending", attempts: 0, questions, showDefinitions: true };
}

/** Fold a service gate response into the flow state. */
export function applyGateResult(state: GateState, result: GateResult): GateState {
  if (result.passed) {
    return { ...state, status: "passed", attempts: result.attempts, showDefinitions: false };
  }
  if (!result.retry_allowed) {
    return { ...state, status: "locked", attempts: result.attempts, showDefinitions: false };
  }
  // retry: re-show the definitions before the next attempt
  return { ...state, status: "retry", attempts: result.attempts, showDefinitions: true };
}

export function annotationToolsUnlocked(state: GateState): boolean {
  return state.status === "passed";
}

export function sessionReadOnly(state: GateState): boolean {
  return state.status === "locked";
}

/** Answers are complete when every question has a chosen index. */
export function answersComplete(state: GateState, answers: Array<number | null>): answers is number[] {
  return answers.length === state.questions.length && answers.every((a) => a !== null);
}
