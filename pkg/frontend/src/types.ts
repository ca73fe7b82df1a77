// Wire types for the annotation service API. Field names mirror the service
// JSON exactly; the UI never invents or renames fields.

export type SchemaName = "conventional" | "rubicon";

export interface TaskInfo {
  video_id: string;
  instance_key: string;
  class: string;
}

export interface GateQuestion {
  prompt: string;
  choices: string[];
}

export interface SessionInfo {
  session_id: string;
  annotator_id: string;
  schema: SchemaName;
  passed_gate: boolean;
  assigned_tasks: TaskInfo[];
  control_questions?: GateQuestion[];
}

export interface GateResult {
  passed: boolean;
  retry_allowed: boolean;
  attempts: number;
}

export interface IntervalPayload {
  start: number;
  end: number;
}

export interface AnnotationPayload {
  session_id: string;
  annotation_id: string;
  video_id: string;
  class: string;
  annotator_id: string;
  schema: SchemaName;
  instance_key: string;
  interval?: IntervalPayload;
  rb?: {
    pre_actional: IntervalPayload;
    actional: IntervalPayload;
  };
}

export interface RejectionReason {
  code: string;
  message: string;
}

export type SubmitResult =
  | { accepted: true; annotation_id: string }
  | { accepted: false; reasons: RejectionReason[] };

export interface ConsistencyResponse {
  n_annotators: number;
  pair_ious: number[];
  mean: number | null;
  quartiles: number[] | null;
}

export interface VideoMetaInfo {
  video_id: string;
  duration: number;
  frame_rate: number;
}
