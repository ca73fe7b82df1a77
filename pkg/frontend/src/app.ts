// Application wiring: session setup, gate flow, task list, marking controls
// and the live consistency panel. All state transitions live in the pure
// modules; this file only moves data between them and the DOM.

import { AnnotationServiceClient } from "./api.js";
import {
  annotationToolsUnlocked,
  answersComplete,
  applyGateResult,
  GateState,
  initialGate,
  sessionReadOnly,
} from "./gate.js";
import {
  canSubmit,
  createMarking,
  mark,
  MarkingState,
  missingRoles,
  orderingViolations,
  Role,
  rolesFor,
  toPayload,
} from "./marking.js";
import { panelModel } from "./consistencyPanel.js";
import { FramePlayer } from "./player.js";
import type { SessionInfo, TaskInfo } from "./types.js";

const ROLE_LABELS: Record<Role, string> = {
  start: "start",
  end: "end",
  pre_start: "pre-actional start",
  boundary: "actional start",
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  private client = new AnnotationServiceClient("");
  private session: SessionInfo | null = null;
  private gate: GateState = initialGate("conventional", []);
  private marking: MarkingState | null = null;
  private player: FramePlayer | null = null;
  private task: TaskInfo | null = null;
  private answers: Array<number | null> = [];
  private annotationCounter = 1;

  async start(): Promise<void> {
    el<HTMLButtonElement>("create-session").onclick = () => void this.createSession();
    el<HTMLButtonElement>("gate-submit").onclick = () => void this.submitGate();
    el<HTMLButtonElement>("submit-annotation").onclick = () => void this.submitAnnotation();
    el<HTMLInputElement>("snap-toggle").onchange = (event) => {
      if (this.marking) this.marking = { ...this.marking, snap: (event.target as HTMLInputElement).checked };
    };
  }

  private async createSession(): Promise<void> {
    const annotator = el<HTMLInputElement>("annotator-id").value.trim();
    const schema = el<HTMLSelectElement>("schema-select").value as "conventional" | "rubicon";
    if (!annotator) return this.banner("enter an annotator id");
    this.session = await this.client.createSession(annotator, schema);
    this.gate = initialGate(schema, this.session.control_questions ?? [], this.session.passed_gate);
    this.answers = new Array(this.gate.questions.length).fill(null);
    this.renderGate();
    await this.renderTasks();
  }

  private renderGate(): void {
    const container = el<HTMLDivElement>("gate");
    container.hidden = annotationToolsUnlocked(this.gate);
    el<HTMLDivElement>("definitions").hidden = !this.gate.showDefinitions;
    if (sessionReadOnly(this.gate)) {
      this.banner("control questions failed; session is read-only");
      el<HTMLButtonElement>("gate-submit").disabled = true;
      return;
    }
    const list = el<HTMLDivElement>("gate-questions");
    list.innerHTML = "";
    this.gate.questions.forEach((question, qi) => {
      const fieldset = document.createElement("fieldset");
      const legend = document.createElement("legend");
      legend.textContent = question.prompt;
      fieldset.append(legend);
      question.choices.forEach((choice, ci) => {
        const label = document.createElement("label");
        const input = document.createElement("input");
        input.type = "radio";
        input.name = `q${qi}`;
        input.onchange = () => {
          this.answers[qi] = ci;
        };
        label.append(input, ` ${choice}`);
        fieldset.append(label, document.createElement("br"));
      });
      list.append(fieldset);
    });
  }

  private async submitGate(): Promise<void> {
    if (!this.session) return;
    if (!answersComplete(this.gate, this.answers)) return this.banner("answer every question");
    const result = await this.client.answerGate(this.session.session_id, this.answers as number[]);
    this.gate = applyGateResult(this.gate, result);
    this.renderGate();
    if (annotationToolsUnlocked(this.gate)) this.banner("gate passed; annotation tools unlocked");
    else if (this.gate.status === "retry") this.banner("not quite; re-read the definitions and retry");
  }

  private async renderTasks(): Promise<void> {
    if (!this.session) return;
    const tasks = await this.client.listTasks(this.session.session_id);
    const list = el<HTMLUListElement>("tasks");
    list.innerHTML = "";
    tasks.forEach((task) => {
      const item = document.createElement("li");
      const button = document.createElement("button");
      button.textContent = `${task.class} — ${task.video_id} (${task.instance_key})`;
      button.onclick = () => void this.openTask(task);
      item.append(button);
      list.append(item);
    });
  }

  private async openTask(task: TaskInfo): Promise<void> {
    if (!this.session) return;
    this.task = task;
    const meta = await this.client.videoMeta(task.video_id);
    const video = el<HTMLVideoElement>("video");
    video.src = this.client.videoUrl(task.video_id);
    this.player = new FramePlayer(video, meta.frame_rate);
    this.player.bindKeyboard();
    this.marking = createMarking(this.session.schema, meta.frame_rate, el<HTMLInputElement>("snap-toggle").checked);
    this.renderMarkButtons();
    this.renderMarking();
    await this.refreshConsistency();
  }

  private renderMarkButtons(): void {
    if (!this.marking) return;
    const bar = el<HTMLDivElement>("mark-buttons");
    bar.innerHTML = "";
    rolesFor(this.marking.mode).forEach((role) => {
      const button = document.createElement("button");
      button.textContent = `mark ${ROLE_LABELS[role]}`;
      button.onclick = () => {
        if (!this.marking || !this.player) return;
        this.marking = mark(this.marking, role, this.player.playhead);
        this.renderMarking();
      };
      bar.append(button);
    });
  }

  private renderMarking(): void {
    if (!this.marking) return;
    const state = this.marking;
    el<HTMLDivElement>("marks").textContent = rolesFor(state.mode)
      .map((role) => `${ROLE_LABELS[role]}: ${state.marks[role] ?? "—"}`)
      .join("   ");
    const violations = orderingViolations(state);
    el<HTMLDivElement>("violations").textContent = violations.join("; ");
    const missing = missingRoles(state);
    el<HTMLButtonElement>("submit-annotation").disabled =
      !canSubmit(state) || !annotationToolsUnlocked(this.gate);
    el<HTMLDivElement>("marking-hint").textContent = missing.length
      ? `still to mark: ${missing.map((role) => ROLE_LABELS[role]).join(", ")}`
      : violations.length
        ? "fix the ordering before submitting"
        : "ready to submit";
  }

  private async submitAnnotation(): Promise<void> {
    if (!this.session || !this.marking || !this.task) return;
    const payload = toPayload(this.marking, {
      sessionId: this.session.session_id,
      annotationId: `${this.session.annotator_id}-${this.task.instance_key}-${this.annotationCounter}`,
      videoId: this.task.video_id,
      actionClass: this.task.class,
      annotatorId: this.session.annotator_id,
      instanceKey: this.task.instance_key,
    });
    const result = await this.client.submitAnnotation(payload);
    if (result.accepted) {
      this.annotationCounter += 1;
      this.banner(`accepted ${result.annotation_id}`);
      await this.refreshConsistency();
    } else {
      // render the service's reasons verbatim
      this.banner(result.reasons.map((reason) => `${reason.code}: ${reason.message}`).join("; "));
    }
  }

  private async refreshConsistency(): Promise<void> {
    if (!this.session || !this.task) return;
    const scheme = this.session.schema === "rubicon" ? "rb_full" : "conventional";
    const response = await this.client.consistency(this.task.instance_key, scheme);
    const model = panelModel(response);
    el<HTMLDivElement>("panel-headline").textContent = model.headline;
    el<HTMLDivElement>("panel-pairs").textContent = model.pairs.length
      ? `pairwise IoU: ${model.pairs.join(", ")}`
      : "";
    el<HTMLDivElement>("panel-quartiles").textContent = model.quartiles
      ? `min/q1/median/q3/max: ${model.quartiles.join(" / ")}`
      : "";
  }

  private banner(text: string): void {
    el<HTMLDivElement>("banner").textContent = text;
  }
}

if (typeof document !== "undefined") {
  const app = new App();
  void app.start();
}
