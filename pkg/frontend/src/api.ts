// Typed client for the annotation service. The fetch function is injectable
// so tests can capture exactly what goes over the wire.

import type {
  AnnotationPayload,
  ConsistencyResponse,
  GateResult,
  SchemaName,
  SessionInfo,
  SubmitResult,
  TaskInfo,
  VideoMetaInfo,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, public body: unknown) {
    super(`service responded ${status}`);
  }
}

export class AnnotationServiceClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown, okStatuses: number[] = [200]): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const parsed = await response.json();
    if (!okStatuses.includes(response.status)) {
      throw new ApiError(response.status, parsed);
    }
    return parsed as T;
  }

  createSession(annotatorId: string, schema: SchemaName): Promise<SessionInfo> {
    return this.request<SessionInfo>("POST", "/sessions", { annotator_id: annotatorId, schema });
  }

  answerGate(sessionId: string, answers: number[]): Promise<GateResult> {
    return this.request<GateResult>("POST", `/sessions/${encodeURIComponent(sessionId)}/gate`, { answers });
  }

  async listTasks(sessionId: string): Promise<TaskInfo[]> {
    const body = await this.request<{ tasks: TaskInfo[] }>(
      "GET",
      `/tasks?session=${encodeURIComponent(sessionId)}`,
    );
    return body.tasks;
  }

  /** Submission outcomes (200 accept, 403/422 reject) are results, not errors. */
  submitAnnotation(payload: AnnotationPayload): Promise<SubmitResult> {
    return this.request<SubmitResult>("POST", "/annotations", payload, [200, 403, 422]);
  }

  consistency(instanceKey: string, scheme: string): Promise<ConsistencyResponse> {
    return this.request<ConsistencyResponse>(
      "GET",
      `/instances/${encodeURIComponent(instanceKey)}/consistency?scheme=${encodeURIComponent(scheme)}`,
    );
  }

  videoMeta(videoId: string): Promise<VideoMetaInfo> {
    return this.request<VideoMetaInfo>("GET", `/videos/${encodeURIComponent(videoId)}/meta`);
  }

  videoUrl(videoId: string): string {
    return `${this.baseUrl}/videos/${encodeURIComponent(videoId)}`;
  }
}
