// Thin wrapper around a <video> element adding frame-accurate stepping.
// Boundary disagreements are sub-second, so the keyboard moves by single
// frames (arrow keys) and whole seconds (shift+arrows).

import { snapToFrame } from "./marking.js";

export class FramePlayer {
  constructor(
    private video: HTMLVideoElement,
    public frameRate: number,
  ) {
    if (frameRate <= 0) throw new Error(`frame rate must be positive, got ${frameRate}`);
  }

  get playhead(): number {
    return this.video.currentTime;
  }

  /** The timestamp shown next to the playhead, snapped onto the frame grid. */
  get displayedTime(): number {
    return snapToFrame(this.video.currentTime, this.frameRate);
  }

  get frameIndex(): number {
    return Math.round(this.video.currentTime * this.frameRate);
  }

  seekTo(t: number): void {
    const clamped = Math.max(0, Math.min(t, this.video.duration || t));
    this.video.currentTime = clamped;
  }

  stepFrames(n: number): void {
    this.video.pause();
    this.seekTo(snapToFrame(this.video.currentTime, this.frameRate) + n / this.frameRate);
  }

  stepSeconds(n: number): void {
    this.video.pause();
    this.seekTo(this.video.currentTime + n);
  }

  togglePlay(): void {
    if (this.video.paused) void this.video.play();
    else this.video.pause();
  }

  bindKeyboard(target: GlobalEventHandlers = window): void {
    target.onkeydown = (event: KeyboardEvent) => {
      if (event.target instanceof HTMLInputElement) return;
      switch (event.key) {
        case "ArrowLeft":
          event.shiftKey ? this.stepSeconds(-1) : this.stepFrames(-1);
          break;
        case "ArrowRight":
          event.shiftKey ? this.stepSeconds(1) : this.stepFrames(1);
          break;
        case " ":
          event.preventDefault();
          this.togglePlay();
          break;
      }
    };
  }
}
