// Short recognition cue so the player knows a fire registered without
// looking away from the game. No-op outside a browser.

let context: AudioContext | null = null;

export function fireCue(): void {
  if (typeof AudioContext === "undefined") return;
  try {
    context = context ?? new AudioContext();
    const osc = context.createOscillator();
    const gain = context.createGain();
    osc.frequency.value = 880;
    gain.gain.setValueAtTime(0.12, context.currentTime);
    gain.gain.exponentialRampToValueAtTime(0.0001, context.currentTime + 0.12);
    osc.connect(gain).connect(context.destination);
    osc.start();
    osc.stop(context.currentTime + 0.13);
  } catch {
    // audio is a courtesy; never let it break the panel
  }
}
