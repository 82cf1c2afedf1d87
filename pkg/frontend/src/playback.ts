// Timed stepping through a detection's frame strip. There is no video in
// the bundles, only the frames inside the detection window, so "playback"
// advances an index at a user-set rate and loops at the end of the strip.

const MIN_FPS = 0.25;
const MAX_FPS = 30;
const DEFAULT_FPS = 4;

export class FramePlayer {
  private frameCount = 0;
  private index = 0;
  private fps = DEFAULT_FPS;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(private readonly onFrame: (index: number) => void) {}

  get current(): number {
    return this.index;
  }

  get playing(): boolean {
    return this.timer !== null;
  }

  get rate(): number {
    return this.fps;
  }

  setFrames(count: number): void {
    this.pause();
    this.frameCount = Math.max(0, count);
    this.index = 0;
    if (this.frameCount > 0) this.onFrame(0);
  }

  seek(index: number): void {
    if (this.frameCount === 0) return;
    const clamped = Math.min(Math.max(index, 0), this.frameCount - 1);
    this.index = clamped;
    this.onFrame(clamped);
  }

  step(delta: number): void {
    if (this.frameCount === 0) return;
    const next = (this.index + delta + this.frameCount) % this.frameCount;
    this.index = next;
    this.onFrame(next);
  }

  play(): void {
    if (this.timer !== null || this.frameCount === 0) return;
    this.timer = setInterval(() => this.step(1), 1000 / this.fps);
  }

  pause(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  toggle(): void {
    if (this.playing) {
      this.pause();
    } else {
      this.play();
    }
  }

  setRate(fps: number): void {
    if (!Number.isFinite(fps)) return;
    this.fps = Math.min(Math.max(fps, MIN_FPS), MAX_FPS);
    if (this.playing) {
      // restart the interval so the new rate applies immediately
      this.pause();
      this.play();
    }
  }
}
